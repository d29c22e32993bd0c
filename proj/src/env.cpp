#include "heatlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "heatlab/errors.hpp"
#include "heatlab/parallel.hpp"
#include "heatlab/random.hpp"

namespace heatlab {

namespace {

constexpr double kMomentMargin = 1.1;
// Mean number of blob centers per bump ball.
constexpr double kBlobsPerBall = 3.0;
// Variance floor for the blob standardization; keeps u continuous where no
// bump covers a cell (marginal is then stochastically lighter than Pareto).
constexpr double kBlobNugget = 1e-3;

constexpr std::uint64_t kOffsetStream = 0x0FF5E7ULL;
constexpr std::uint64_t kThetaField = 64;

// Polynomial bump, C^2, supported on [0, 1).
double bump(double x) {
  if (x >= 1.0) return 0.0;
  const double s = 1.0 - x * x;
  return s * s * s;
}

double ball_volume(int d, double radius) {
  return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0) * std::pow(radius, d);
}

void check_tail(double index, double exponent, const std::string& what) {
  if (std::isinf(index) || exponent <= 0.0) return;
  std::ostringstream os;
  if (index <= exponent) {
    os << "moment margin: " << what << " is infinite (tail index " << index << " <= exponent "
       << exponent << ")";
    throw MomentMarginError(os.str());
  }
  if (index < kMomentMargin * exponent) {
    os << "moment margin: " << what << " has tail index " << index << " < 1.1 * " << exponent;
    throw MomentMarginError(os.str());
  }
}

int blocks_per_side(const EnvironmentSpec& spec, double target_side) {
  return std::max(1, static_cast<int>(std::ceil(spec.box_side / target_side - 1e-12)));
}

std::size_t block_of(const Point& x, const std::array<double, 3>& offset, double block_side,
                     int count, double box, int dim) {
  std::size_t k = 0;
  for (int a = 0; a < dim; ++a) {
    double v = std::fmod(x[a] - offset[a], box);
    if (v < 0) v += box;
    int b = std::min(count - 1, static_cast<int>(v / block_side));
    k = k * count + static_cast<std::size_t>(b);
  }
  return k;
}

// Survival probabilities 1 - u of a uniform field with finite-range
// dependence, for the checkerboard model.
std::vector<double> checkerboard_survival(const EnvironmentSpec& spec, const Grid& grid,
                                          std::uint64_t field_id, int workers) {
  const int d = spec.dim;
  const int count = blocks_per_side(spec, spec.dependence_range / 2.0);
  const double block_side = spec.box_side / count;
  Rng offset_rng = make_rng(spec.seed, {field_id, kOffsetStream});
  std::array<double, 3> offset{0, 0, 0};
  for (int a = 0; a < d; ++a) offset[a] = uniform_open(offset_rng) * block_side;

  std::size_t nblocks = 1;
  for (int a = 0; a < d; ++a) nblocks *= count;
  std::vector<double> noise(nblocks);
  for (std::size_t k = 0; k < nblocks; ++k) {
    Rng rng = make_rng(spec.seed, {field_id, k});
    noise[k] = standard_normal(rng);
  }

  struct Tap {
    Point shift;
    double weight;
  };
  std::vector<Tap> taps;
  const double h = grid.spacing();
  const double rho = spec.dependence_range / 4.0;
  const int reach = spec.mollify ? static_cast<int>(std::floor(rho / h)) : 0;
  for (int i = -reach; i <= reach; ++i)
    for (int j = (d > 1 ? -reach : 0); j <= (d > 1 ? reach : 0); ++j)
      for (int k = (d > 2 ? -reach : 0); k <= (d > 2 ? reach : 0); ++k) {
        Point s{i * h, j * h, k * h};
        double w = spec.mollify ? bump(norm(s, d) / rho) : 1.0;
        if (w > 0.0) taps.push_back({s, w});
      }

  std::vector<double> survival(grid.size());
  parallel_for(
      grid.size(),
      [&](std::size_t begin, std::size_t end) {
        std::vector<std::pair<std::size_t, double>> acc;
        for (std::size_t c = begin; c < end; ++c) {
          acc.clear();
          const Point x = grid.position(c);
          for (const Tap& t : taps) {
            Point y{x[0] + t.shift[0], x[1] + t.shift[1], x[2] + t.shift[2]};
            std::size_t b = block_of(y, offset, block_side, count, spec.box_side, d);
            auto it = std::find_if(acc.begin(), acc.end(), [b](auto& e) { return e.first == b; });
            if (it == acc.end())
              acc.emplace_back(b, t.weight);
            else
              it->second += t.weight;
          }
          double g = 0.0, s = 0.0;
          for (auto& [b, w] : acc) {
            g += w * noise[b];
            s += w * w;
          }
          const double z = g / std::sqrt(s);
          survival[c] = 0.5 * std::erfc(z / std::numbers::sqrt2);
        }
      },
      workers);
  return survival;
}

std::size_t poisson(Rng& rng, double mean) {
  // Knuth; means here are O(10).
  const double limit = std::exp(-mean);
  std::size_t k = 0;
  double prod = uniform_open(rng);
  while (prod > limit) {
    ++k;
    prod *= uniform_open(rng);
  }
  return k;
}

std::vector<double> blob_survival(const EnvironmentSpec& spec, const Grid& grid,
                                  std::uint64_t field_id) {
  const int d = spec.dim;
  std::vector<double> survival(grid.size());
  if (!spec.mollify) {
    for (std::size_t c = 0; c < grid.size(); ++c) {
      Rng rng = make_rng(spec.seed, {field_id, 0xCE11ULL, c});
      survival[c] = 0.5 * std::erfc(standard_normal(rng) / std::numbers::sqrt2);
    }
    return survival;
  }
  const double radius = spec.dependence_range / 2.0;
  const int count = blocks_per_side(spec, radius);
  const double block_side = spec.box_side / count;
  const double mean_per_block = kBlobsPerBall / ball_volume(d, radius) * std::pow(block_side, d);
  std::size_t nblocks = 1;
  for (int a = 0; a < d; ++a) nblocks *= count;

  std::vector<double> g(grid.size(), 0.0), s(grid.size(), 0.0);
  for (std::size_t k = 0; k < nblocks; ++k) {
    Rng rng = make_rng(spec.seed, {field_id, k});
    const std::size_t n = poisson(rng, mean_per_block);
    std::size_t rem = k;
    std::array<int, 3> bc{0, 0, 0};
    for (int a = d - 1; a >= 0; --a) {
      bc[a] = static_cast<int>(rem % count);
      rem /= count;
    }
    for (std::size_t i = 0; i < n; ++i) {
      Point center{0, 0, 0};
      for (int a = 0; a < d; ++a) center[a] = (bc[a] + uniform_open(rng)) * block_side;
      const double mark = standard_normal(rng);
      for (std::size_t c : grid.ball(center, radius)) {
        const double w = bump(grid.distance(center, grid.position(c)) / radius);
        g[c] += mark * w;
        s[c] += w * w;
      }
    }
  }
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double z = g[c] / std::sqrt(s[c] + kBlobNugget);
    survival[c] = 0.5 * std::erfc(z / std::numbers::sqrt2);
  }
  return survival;
}

std::vector<double> survival_field(const EnvironmentSpec& spec, const Grid& grid,
                                   std::uint64_t field_id, int workers) {
  return spec.model == MarginalModel::checkerboard
             ? checkerboard_survival(spec, grid, field_id, workers)
             : blob_survival(spec, grid, field_id);
}

Vec pareto_field(const EnvironmentSpec& spec, const Grid& grid, std::uint64_t field_id,
                 double index, int workers) {
  Vec v = Vec::Ones(static_cast<Eigen::Index>(grid.size()));
  if (std::isinf(index)) return v;
  const std::vector<double> sv = survival_field(spec, grid, field_id, workers);
  for (std::size_t c = 0; c < grid.size(); ++c) v[c] = std::pow(sv[c], -1.0 / index);
  return v;
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

void validate(const EnvironmentSpec& spec) {
  std::ostringstream os;
  if (spec.dim != 2 && spec.dim != 3) throw ValidationError("spec: dimension must be 2 or 3");
  if (spec.cells_per_side < 8) throw ValidationError("spec: cells_per_side must be >= 8");
  if (!(spec.box_side > 0.0) || !std::isfinite(spec.box_side))
    throw ValidationError("spec: box_side must be positive (h > 0)");
  const double h = spec.spacing();
  if (!(spec.dependence_range >= 2.0 * h * (1.0 - 1e-12)))
    throw ValidationError("spec: dependence_range must be >= 2h");
  for (double t : {spec.upper_tail, spec.lower_tail, spec.speed_tail})
    if (!(t > 0.0)) throw ValidationError("spec: tail indices must be positive");
  const auto& e = spec.exponents;
  if (!(e.p > 0 && e.q > 0 && e.r > 0)) throw ValidationError("spec: exponents must be positive");
  const double two_over_d = 2.0 / spec.dim;
  if (spec.regime == MomentRegime::m2) {
    if (!(e.p > 1.0 && e.q > 1.0)) throw ValidationError("spec: M2 regime needs p, q > 1");
    if (!(1.0 / e.p + 1.0 / e.q < two_over_d))
      throw ValidationError("spec: M2 regime needs 1/p + 1/q < 2/d");
  } else if (spec.regime == MomentRegime::m1) {
    if (!(e.p > 1.0 && e.q > 1.0 && e.r > 1.0))
      throw ValidationError("spec: M1 regime needs p, q, r > 1");
    if (!(1.0 / e.r + 1.0 / e.q + (1.0 / (e.p - 1.0)) * ((e.r - 1.0) / e.r) < two_over_d))
      throw ValidationError("spec: M1 regime needs 1/r + 1/q + (r-1)/(r(p-1)) < 2/d");
  }
  check_tail(spec.upper_tail, e.p, "E[Lambda^p]");
  check_tail(spec.lower_tail, e.q, "E[lambda^-q]");
  switch (spec.speed) {
    case SpeedMode::unit:
      break;
    case SpeedMode::lambda:
      check_tail(spec.upper_tail, e.r, "E[theta^r] (theta = Lambda)");
      // E[Lambda^-1] = E[exp(-max Z)] needs d * lower_tail > 1.
      check_tail(spec.dim * spec.lower_tail, 1.0, "E[theta^-1] (theta = Lambda)");
      break;
    case SpeedMode::independent:
      check_tail(spec.speed_tail, e.r, "E[theta^r]");
      break;
  }
}

EnvironmentField EnvironmentField::from_arrays(const Grid& grid, std::vector<Vec> diag_a,
                                               Vec theta) {
  if (static_cast<int>(diag_a.size()) != grid.dim())
    throw DimensionError("from_arrays: need one diagonal array per axis");
  const auto n = static_cast<Eigen::Index>(grid.size());
  for (const Vec& a : diag_a)
    if (a.size() != n) throw DimensionError("from_arrays: diagonal array has wrong length");
  if (theta.size() != n) throw DimensionError("from_arrays: theta has wrong length");
  EnvironmentField f;
  f.grid = grid;
  f.spec.dim = grid.dim();
  f.spec.cells_per_side = grid.cells_per_side();
  f.spec.box_side = grid.side();
  f.spec.dependence_range = 2.0 * grid.spacing();
  f.diag_a = std::move(diag_a);
  f.theta = std::move(theta);
  f.lambda = f.diag_a[0];
  f.Lambda = f.diag_a[0];
  for (std::size_t e = 1; e < f.diag_a.size(); ++e) {
    f.lambda = f.lambda.cwiseMin(f.diag_a[e]);
    f.Lambda = f.Lambda.cwiseMax(f.diag_a[e]);
  }
  f.check_invariants();
  return f;
}

EnvironmentField EnvironmentField::constant(const Grid& grid, double a, double theta) {
  const auto n = static_cast<Eigen::Index>(grid.size());
  std::vector<Vec> diag(grid.dim(), Vec::Constant(n, a));
  auto f = from_arrays(grid, std::move(diag), Vec::Constant(n, theta));
  f.spec.upper_tail = kNoTail;
  f.spec.lower_tail = kNoTail;
  f.spec.speed = SpeedMode::unit;
  f.spec.regime = MomentRegime::none;
  return f;
}

EnvironmentField EnvironmentField::with_speed(SpeedMode mode) const {
  EnvironmentField f = *this;
  f.spec.speed = mode;
  if (mode == SpeedMode::unit)
    f.theta = Vec::Ones(Lambda.size());
  else if (mode == SpeedMode::lambda)
    f.theta = Lambda;
  else
    throw DomainError("with_speed: only unit and lambda speed measures can be derived");
  return f;
}

void EnvironmentField::check_invariants() const {
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!(theta[i] > 0.0) || !std::isfinite(theta[i]))
      throw ValidationError("field: theta must be positive and finite at cell " + std::to_string(i));
    if (!(lambda[i] > 0.0) || !std::isfinite(Lambda[i]) || lambda[i] > Lambda[i])
      throw ValidationError("field: need 0 < lambda <= Lambda < inf at cell " + std::to_string(i));
    for (const Vec& a : diag_a)
      if (a[i] < lambda[i] || a[i] > Lambda[i])
        throw ValidationError("field: ellipticity sandwich violated at cell " + std::to_string(i));
  }
}

EnvironmentField generate_environment(const EnvironmentSpec& spec, int workers) {
  validate(spec);
  const Grid grid(spec.dim, spec.cells_per_side, spec.spacing());
  std::vector<Vec> diag;
  for (int e = 0; e < spec.dim; ++e) {
    Vec upper = pareto_field(spec, grid, 2 * e, spec.upper_tail, workers);
    Vec lower = pareto_field(spec, grid, 2 * e + 1, spec.lower_tail, workers);
    diag.push_back(upper.cwiseQuotient(lower));
  }
  Vec theta = Vec::Ones(static_cast<Eigen::Index>(grid.size()));
  if (spec.speed == SpeedMode::independent)
    theta = pareto_field(spec, grid, kThetaField, spec.speed_tail, workers);
  EnvironmentField f = EnvironmentField::from_arrays(grid, std::move(diag), std::move(theta));
  if (spec.speed == SpeedMode::lambda) f.theta = f.Lambda;
  f.spec = spec;
  f.seed = spec.seed;
  return f;
}

double max_log_ratio_mgf(double s, double alpha, double beta, int d) {
  const bool alpha_inf = std::isinf(alpha), beta_inf = std::isinf(beta);
  if (alpha_inf && beta_inf) return 1.0;
  if (!alpha_inf && s >= alpha) return std::numeric_limits<double>::infinity();
  if (!beta_inf && s <= -d * beta) return std::numeric_limits<double>::infinity();
  // P(Z > 0) = b, Z | Z > 0 ~ Exp(alpha); Z | Z <= 0 ~ -Exp(beta).
  const double b = alpha_inf ? 0.0 : (beta_inf ? 1.0 : beta / (alpha + beta));
  const double c = 1.0 - b;
  double neg = 0.0;
  if (c > 0.0) neg = std::pow(c, d) * (beta_inf ? 1.0 : d * beta / (d * beta + s));
  double pos = 0.0;
  if (b > 0.0)
    for (int j = 1; j <= d; ++j)
      pos += binomial(d, j) * std::pow(-b, j) * (-j * alpha) / (j * alpha - s);
  return neg + pos;
}

double expected_Lambda_power(const EnvironmentSpec& spec, double s) {
  return max_log_ratio_mgf(s, spec.upper_tail, spec.lower_tail, spec.dim);
}

double expected_lambda_power(const EnvironmentSpec& spec, double s) {
  // lambda^s = exp(-s * max(-Z)), and -Z swaps the two tail indices.
  return max_log_ratio_mgf(-s, spec.lower_tail, spec.upper_tail, spec.dim);
}

double expected_theta_power(const EnvironmentSpec& spec, double s) {
  switch (spec.speed) {
    case SpeedMode::unit:
      return 1.0;
    case SpeedMode::lambda:
      return expected_Lambda_power(spec, s);
    case SpeedMode::independent:
      if (std::isinf(spec.speed_tail)) return 1.0;
      if (s >= spec.speed_tail) return std::numeric_limits<double>::infinity();
      return spec.speed_tail / (spec.speed_tail - s);
  }
  return 1.0;
}

namespace {
void check_radius(const Grid& grid, double radius) {
  if (radius > grid.side() / 2.0 * (1.0 + 1e-12))
    throw DomainError("radius exceeds L/2: periodic wrap would double-count cells");
  if (!(radius >= 0.0)) throw DomainError("radius must be nonnegative");
}
}  // namespace

double ball_average(const Grid& grid, const Vec& f, const Point& center, double radius) {
  check_radius(grid, radius);
  const auto cells = grid.ball(center, radius);
  if (cells.empty()) throw DomainError("ball contains no cell centers");
  double s = 0.0;
  for (std::size_t c : cells) s += f[static_cast<Eigen::Index>(c)];
  return s / static_cast<double>(cells.size());
}

double ball_norm(const Grid& grid, const Vec& f, double p, const Point& center, double radius,
                 const Vec* nu) {
  check_radius(grid, radius);
  const auto cells = grid.ball(center, radius);
  if (cells.empty()) throw DomainError("ball contains no cell centers");
  double s = 0.0;
  for (std::size_t c : cells) {
    const auto i = static_cast<Eigen::Index>(c);
    s += std::pow(std::abs(f[i]), p) * (nu ? (*nu)[i] : 1.0);
  }
  return std::pow(s / static_cast<double>(cells.size()), 1.0 / p);
}


MomentReport environment_stats(const EnvironmentField& field, std::span<const Point> centers,
                               std::span<const double> radii) {
  return environment_stats(field, field.spec.exponents, centers, radii);
}

MomentReport environment_stats(const EnvironmentField& field, const MomentExponents& exps,
                               std::span<const Point> centers, std::span<const double> radii) {
  for (double r : radii) check_radius(field.grid, r);
  std::vector<double> sorted(radii.begin(), radii.end());
  std::sort(sorted.begin(), sorted.end());

  const Vec Lp = field.Lambda.array().pow(exps.p).matrix();
  const Vec linv = field.lambda.array().pow(-exps.q).matrix();
  MomentReport rep;
  rep.Lambda_p = Lp.mean();
  rep.lambda_inv_q = linv.mean();
  rep.theta_r = field.theta.array().pow(exps.r).mean();
  rep.Lambda_p_theta_1mp =
      (field.Lambda.array().pow(exps.p) * field.theta.array().pow(1.0 - exps.p)).mean();
  rep.theta_inv = field.theta.array().inverse().mean();
  rep.Lambda_mean = field.Lambda.mean();

  for (const Point& c : centers) {
    BallCurve curve;
    curve.center = c;
    curve.radii = sorted;
    for (double r : sorted) {
      curve.Lambda_p.push_back(ball_average(field.grid, Lp, c, r));
      curve.lambda_inv_q.push_back(ball_average(field.grid, linv, c, r));
    }
    auto within = [](double v, double ref) { return v < 2.0 * ref && v > 0.5 * ref; };
    curve.burn_in = std::numeric_limits<double>::infinity();
    for (std::size_t i = sorted.size(); i-- > 0;) {
      if (!within(curve.Lambda_p[i], rep.Lambda_p) || !within(curve.lambda_inv_q[i], rep.lambda_inv_q))
        break;
      curve.burn_in = sorted[i];
    }
    rep.curves.push_back(std::move(curve));
  }
  return rep;
}

double a_script(const EnvironmentField& field, const Point& center, double n) {
  return a_script(field, field.spec.exponents, center, n);
}

double a_script(const EnvironmentField& field, const MomentExponents& exps, const Point& center,
                double n) {
  check_radius(field.grid, n);
  const Vec ratio = field.Lambda.cwiseQuotient(field.theta).cwiseMax(1.0);
  const Vec inv_lambda = field.lambda.cwiseInverse().cwiseMax(1.0);
  const Vec theta = field.theta.cwiseMax(1.0);
  return ball_norm(field.grid, ratio, exps.p, center, n, &field.theta) *
         ball_norm(field.grid, inv_lambda, exps.q, center, n) *
         ball_norm(field.grid, theta, exps.r, center, n);
}

std::string to_string(MarginalModel m) {
  return m == MarginalModel::checkerboard ? "checkerboard" : "blob";
}
std::string to_string(SpeedMode m) {
  switch (m) {
    case SpeedMode::unit: return "unit";
    case SpeedMode::lambda: return "Lambda";
    case SpeedMode::independent: return "independent";
  }
  return "unit";
}
std::string to_string(MomentRegime m) {
  switch (m) {
    case MomentRegime::none: return "none";
    case MomentRegime::m1: return "M1";
    case MomentRegime::m2: return "M2";
  }
  return "none";
}
MarginalModel parse_marginal_model(const std::string& s) {
  if (s == "checkerboard" || s == "checkerboard-mollified") return MarginalModel::checkerboard;
  if (s == "blob") return MarginalModel::blob;
  throw ValidationError("unknown marginal model '" + s + "'");
}
SpeedMode parse_speed_mode(const std::string& s) {
  if (s == "unit") return SpeedMode::unit;
  if (s == "Lambda" || s == "lambda") return SpeedMode::lambda;
  if (s == "independent") return SpeedMode::independent;
  throw ValidationError("unknown speed mode '" + s + "'");
}
MomentRegime parse_moment_regime(const std::string& s) {
  if (s == "none") return MomentRegime::none;
  if (s == "M1" || s == "m1") return MomentRegime::m1;
  if (s == "M2" || s == "m2") return MomentRegime::m2;
  throw ValidationError("unknown moment regime '" + s + "'");
}

}  // namespace heatlab
