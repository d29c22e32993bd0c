#include "heatlab/stochastics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "heatlab/errors.hpp"
#include "heatlab/parallel.hpp"

namespace heatlab {

ChainGeometry chain_geometry(const Point& x, double r, int dim) {
  ChainGeometry c;
  c.dim = dim;
  c.x = x;
  c.r = r;
  c.length = norm(x, dim);
  if (!(r > 0.0) || r > 4.0 * c.length * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "chain_geometry: need 0 < r <= 4|x|, got r = " << r << ", |x| = " << c.length;
    throw DomainError(os.str());
  }
  const double lo = 12.0 * c.length / r, hi = 16.0 * c.length / r;
  c.k = static_cast<int>(std::ceil(lo - 1e-12));
  if (c.k > hi + 1e-12) throw DomainError("chain_geometry: no admissible k");
  c.s = r * c.length / c.k;
  c.ball_radius = r / 48.0;
  for (int j = 0; j <= c.k; ++j) {
    Point p{0, 0, 0};
    for (int a = 0; a < dim; ++a) p[a] = x[a] * j / c.k;
    c.points.push_back(p);
  }
  return c;
}

std::vector<Point> random_admissible_sequence(const ChainGeometry& chain, const Point& origin, Rng& rng) {
  std::vector<Point> y(chain.points.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    Point p = chain.points[j];
    if (j > 0 && j + 1 < y.size()) {
      // Uniform in the ball by rejection from the cube.
      Point u{0, 0, 0};
      do {
        for (int a = 0; a < chain.dim; ++a) u[a] = 2.0 * uniform_open(rng) - 1.0;
      } while (norm(u, chain.dim) > 1.0);
      for (int a = 0; a < chain.dim; ++a) p[a] += chain.ball_radius * u[a];
    }
    for (int a = 0; a < chain.dim; ++a) p[a] += origin[a];
    y[j] = p;
  }
  return y;
}

ChainedAverageReport chained_average_bound(const EnvironmentField& field, const ChainGeometry& chain,
                                           std::span<const Point> y, const Point& origin,
                                           const MomentExponents& exps, double kappa) {
  const int d = field.grid.dim();
  if (chain.dim != d) throw DimensionError("chained_average_bound: chain and field dimensions differ");
  if (y.size() != chain.points.size()) throw DomainError("sequence error: expected k + 1 points");
  for (std::size_t j = 0; j < y.size(); ++j) {
    Point target{0, 0, 0};
    for (int a = 0; a < d; ++a) target[a] = origin[a] + chain.points[j][a];
    double off = 0.0;
    for (int a = 0; a < d; ++a) off += (y[j][a] - target[a]) * (y[j][a] - target[a]);
    const double allowed = (j == 0 || j + 1 == y.size()) ? 0.0 : chain.ball_radius;
    if (std::sqrt(off) > allowed + 1e-9 * std::max(1.0, chain.r)) {
      std::ostringstream os;
      os << "sequence error: y_" << j << " lies outside B(x_" << j << ", " << allowed << ")";
      throw DomainError(os.str());
    }
  }
  if (1.0 / exps.p + 1.0 / exps.q > 1.0) throw ValidationError("chained_average_bound: need 1/p + 1/q <= 1");

  const Vec inv_lambda = field.lambda.cwiseInverse();
  const double radius = std::sqrt(chain.s);
  ChainedAverageReport rep;
  rep.k = chain.k;
  rep.s = chain.s;
  double sum_p = 0.0, sum_q = 0.0;
  for (int j = 0; j < chain.k; ++j) {
    const double A = std::max(1.0, ball_norm(field.grid, field.Lambda, exps.p, y[j], radius));
    const double B = std::max(1.0, ball_norm(field.grid, inv_lambda, exps.q, y[j], radius));
    rep.terms.push_back(std::pow(A, kappa) * std::pow(B, kappa));
    rep.holder_lhs += A * B;
    sum_p += std::pow(A, exps.p);
    sum_q += std::pow(B, exps.q);
  }
  for (double t : rep.terms) rep.sum += t;
  rep.mean = rep.sum / chain.k;
  rep.holder_rhs = std::pow(static_cast<double>(chain.k), 1.0 - 1.0 / exps.p - 1.0 / exps.q) *
                   std::pow(sum_p, 1.0 / exps.p) * std::pow(sum_q, 1.0 / exps.q);
  return rep;
}

double DiscreteVariable::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
  return m;
}

double DiscreteVariable::abs_moment(double k) const {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) m += std::pow(std::abs(values[i]), k) * probs[i];
  return m;
}

DiscreteVariable random_centered_variable(Rng& rng, int support) {
  DiscreteVariable v;
  double total = 0.0;
  for (int i = 0; i < support; ++i) {
    // Log-uniform scales give a mix of light and lopsided variables.
    v.values.push_back(standard_normal(rng) * std::exp(2.0 * standard_normal(rng)));
    v.probs.push_back(std::exp(3.0 * (uniform_open(rng) - 0.5)));
    total += v.probs.back();
  }
  for (double& p : v.probs) p /= total;
  const double m = v.mean();
  for (double& x : v.values) x -= m;
  return v;
}

RosenthalReport rosenthal_check(std::span<const DiscreteVariable> vars, double k) {
  if (!(k > 2.0)) throw ValidationError("rosenthal_check: need k > 2");
  if (vars.empty() || vars.size() > 6) throw ValidationError("rosenthal_check: need 1 to 6 variables");
  RosenthalReport rep;
  double var_sum = 0.0;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const DiscreteVariable& v = vars[i];
    if (v.values.empty() || v.values.size() > 4 || v.values.size() != v.probs.size())
      throw ValidationError("rosenthal_check: each variable needs 1 to 4 atoms");
    double total = 0.0, scale = 0.0;
    for (std::size_t a = 0; a < v.values.size(); ++a) {
      if (!(v.probs[a] >= 0.0)) throw ValidationError("rosenthal_check: negative probability");
      total += v.probs[a];
      scale += std::abs(v.values[a]) * v.probs[a];
    }
    if (std::abs(total - 1.0) > 1e-12) throw ValidationError("rosenthal_check: probabilities must sum to 1");
    if (std::abs(v.mean()) > 1e-12 * std::max(1.0, scale)) {
      std::ostringstream os;
      os << "centering error: variable " << i << " has mean " << v.mean();
      throw ValidationError(os.str());
    }
    rep.sum_abs_moments += v.abs_moment(k);
    var_sum += v.abs_moment(2.0);
  }
  rep.variance_power = std::pow(var_sum, k / 2.0);

  // Odometer over the product of supports.
  std::vector<std::size_t> idx(vars.size(), 0);
  while (true) {
    double s = 0.0, p = 1.0;
    for (std::size_t i = 0; i < vars.size(); ++i) {
      s += vars[i].values[idx[i]];
      p *= vars[i].probs[idx[i]];
    }
    rep.lhs += p * std::pow(std::abs(s), k);
    std::size_t i = 0;
    while (i < vars.size() && ++idx[i] == vars[i].values.size()) idx[i++] = 0;
    if (i == vars.size()) break;
  }
  const double rhs = std::max(rep.sum_abs_moments, rep.variance_power);
  rep.ratio = rhs > 0.0 ? rep.lhs / rhs : 0.0;
  return rep;
}

RosenthalEnsemble rosenthal_ensemble(std::size_t count, double k, std::uint64_t seed) {
  RosenthalEnsemble out;
  out.k = k;
  out.ensembles = count;
  out.bound = std::pow(2.0, k);
  for (std::size_t e = 0; e < count; ++e) {
    Rng rng = make_rng(seed, {0x2057ULL, e});
    const int n = 1 + static_cast<int>(uniform_open(rng) * 6.0);
    std::vector<DiscreteVariable> vars;
    for (int i = 0; i < n; ++i) vars.push_back(random_centered_variable(rng, 2 + static_cast<int>(uniform_open(rng) * 3.0)));
    out.max_ratio = std::max(out.max_ratio, rosenthal_check(vars, k).ratio);
  }
  out.pass = out.max_ratio <= out.bound;
  return out;
}

std::vector<std::size_t> region_cubes(int dim, int cubes_per_side, std::size_t K) {
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(cubes_per_side);
  if (K == 0 || K > total) throw DomainError("geometry error: K cubes of side R_dep exceed the box");
  const int m = static_cast<int>(std::lround(std::pow(static_cast<double>(K), 1.0 / dim)));
  std::size_t mp = 1;
  for (int a = 0; a < dim; ++a) mp *= static_cast<std::size_t>(m);
  std::vector<std::size_t> out;
  if (mp == K && m <= cubes_per_side) {
    std::array<int, 3> c{0, 0, 0};
    for (c[0] = 0; c[0] < m; ++c[0])
      for (c[1] = 0; c[1] < (dim > 1 ? m : 1); ++c[1])
        for (c[2] = 0; c[2] < (dim > 2 ? m : 1); ++c[2]) {
          std::size_t i = 0;
          for (int a = 0; a < dim; ++a) i = i * cubes_per_side + c[a];
          out.push_back(i);
        }
  } else {
    for (std::size_t i = 0; i < K; ++i) out.push_back(i);
  }
  return out;
}

namespace {

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  const double f = pos - i;
  return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
}

double spread(const std::vector<double>& ratios) {
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  if (*hi == 0.0) return 1.0;
  return *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
}

}  // namespace

MomentExperimentReport moment_bound_experiment(const EnvironmentSpec& spec, const MomentExperimentOptions& options) {
  validate(spec);
  if (!(options.xi > 1.0)) throw ValidationError("moment_bound_experiment: need xi > 1");
  if (options.samples < 4) throw ValidationError("moment_bound_experiment: need at least 4 samples");
  const bool upper = options.field == MomentField::Lambda;
  const double e = options.exponent > 0.0 ? options.exponent : (upper ? spec.exponents.p : spec.exponents.q);
  // E[f^{2 xi}] must be finite with the usual margin.
  {
    EnvironmentSpec probe = spec;
    probe.regime = MomentRegime::none;
    probe.exponents = {upper ? 2.0 * options.xi * e : 1.0, upper ? 1.0 : 2.0 * options.xi * e, 1.0};
    probe.speed = SpeedMode::lambda;
    validate(probe);
  }
  const double h = spec.spacing();
  const int cube_cells = static_cast<int>(std::lround(spec.dependence_range / h));
  if (std::abs(cube_cells * h - spec.dependence_range) > 1e-9 * spec.dependence_range)
    throw ValidationError("moment_bound_experiment: R_dep must be a multiple of the spacing");
  const int per_side = spec.cells_per_side / cube_cells;
  const int d = spec.dim;
  std::vector<std::vector<std::size_t>> regions;
  for (std::size_t K : options.K) regions.push_back(region_cubes(d, per_side, K));

  MomentExperimentReport rep;
  rep.xi = options.xi;
  rep.exponent = e;
  rep.samples = options.samples;
  rep.mean = upper ? expected_Lambda_power(spec, e) : expected_lambda_power(spec, -e);
  const double cell_volume = std::pow(h, d);

  // values[k][m] = |int_{R_K} (f - E f)|^{2 xi} for sample m
  std::vector<std::vector<double>> values(options.K.size(), std::vector<double>(options.samples));
  parallel_for(options.samples, [&](std::size_t begin, std::size_t end) {
    std::size_t ncubes = 1;
    for (int a = 0; a < d; ++a) ncubes *= static_cast<std::size_t>(per_side);
    std::vector<double> cube(ncubes);
    for (std::size_t m = begin; m < end; ++m) {
      EnvironmentSpec s = spec;
      s.seed = stream_seed(spec.seed, {0x30E7ULL, m});
      const EnvironmentField f = generate_environment(s, 1);
      std::fill(cube.begin(), cube.end(), 0.0);
      for (std::size_t c = 0; c < f.grid.size(); ++c) {
        const CellCoords cc = f.grid.coords(c);
        std::size_t i = 0;
        bool inside = true;
        for (int a = 0; a < d; ++a) {
          const int b = cc[a] / cube_cells;
          inside = inside && b < per_side;
          i = i * per_side + b;
        }
        if (!inside) continue;
        const auto ci = static_cast<Eigen::Index>(c);
        const double v = upper ? std::pow(f.Lambda[ci], e) : std::pow(f.lambda[ci], -e);
        cube[i] += (v - rep.mean) * cell_volume;
      }
      for (std::size_t k = 0; k < regions.size(); ++k) {
        double x = 0.0;
        for (std::size_t i : regions[k]) x += cube[i];
        values[k][m] = std::pow(std::abs(x), 2.0 * options.xi);
      }
    }
  }, options.workers);

  const std::size_t M = options.samples, half = M / 2;
  auto mean_of = [](const std::vector<double>& v, std::size_t b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = b; i < b + n; ++i) s += v[i];
    return s / n;
  };
  std::vector<double> ratios;
  for (std::size_t k = 0; k < regions.size(); ++k) {
    MomentRow row;
    row.K = options.K[k];
    row.moment = mean_of(values[k], 0, M);
    row.ratio = row.moment / std::pow(static_cast<double>(row.K), options.xi);
    row.half_a = mean_of(values[k], 0, half);
    row.half_b = mean_of(values[k], half, M - half);
    rep.rows.push_back(row);
    ratios.push_back(row.ratio);
  }
  rep.max_over_min = spread(ratios);

  // Bootstrap: one resample of environments shared by every K.
  const double alpha = 0.5 * (1.0 - options.confidence);
  std::vector<std::vector<double>> boot_ratio(regions.size()), boot_diff(regions.size());
  std::vector<double> boot_spread;
  Rng rng = make_rng(spec.seed, {0xB0075ULL});
  std::uniform_int_distribution<std::size_t> pick_all(0, M - 1), pick_a(0, half - 1), pick_b(half, M - 1);
  for (std::size_t b = 0; b < options.bootstrap; ++b) {
    std::vector<double> sum(regions.size(), 0.0), sa(regions.size(), 0.0), sb(regions.size(), 0.0);
    for (std::size_t i = 0; i < M; ++i) {
      const std::size_t m = pick_all(rng);
      for (std::size_t k = 0; k < regions.size(); ++k) sum[k] += values[k][m];
    }
    for (std::size_t i = 0; i < half; ++i) {
      const std::size_t ma = pick_a(rng);
      for (std::size_t k = 0; k < regions.size(); ++k) sa[k] += values[k][ma];
    }
    for (std::size_t i = 0; i < M - half; ++i) {
      const std::size_t mb = pick_b(rng);
      for (std::size_t k = 0; k < regions.size(); ++k) sb[k] += values[k][mb];
    }
    std::vector<double> r;
    for (std::size_t k = 0; k < regions.size(); ++k) {
      r.push_back(sum[k] / M / std::pow(static_cast<double>(options.K[k]), options.xi));
      boot_ratio[k].push_back(r.back());
      boot_diff[k].push_back(sa[k] / half - sb[k] / (M - half));
    }
    boot_spread.push_back(spread(r));
  }
  rep.halves_agree = true;
  for (std::size_t k = 0; k < regions.size(); ++k) {
    MomentRow& row = rep.rows[k];
    row.ci_lo = percentile(boot_ratio[k], alpha);
    row.ci_hi = percentile(boot_ratio[k], 1.0 - alpha);
    row.diff_ci_lo = percentile(boot_diff[k], alpha);
    row.diff_ci_hi = percentile(boot_diff[k], 1.0 - alpha);
    if (options.bootstrap > 0 && !(row.diff_ci_lo <= 0.0 && 0.0 <= row.diff_ci_hi)) rep.halves_agree = false;
  }
  rep.max_over_min_ci_lo = percentile(boot_spread, alpha);
  rep.max_over_min_ci_hi = percentile(boot_spread, 1.0 - alpha);
  rep.pass = rep.max_over_min <= options.max_over_min && rep.max_over_min_ci_hi <= options.max_over_min;
  return rep;
}

std::string to_string(MomentField f) { return f == MomentField::Lambda ? "Lambda" : "lambda_inv"; }

MomentField parse_moment_field(const std::string& s) {
  if (s == "Lambda") return MomentField::Lambda;
  if (s == "lambda_inv" || s == "lambda") return MomentField::lambda_inv;
  throw ValidationError("unknown moment field '" + s + "' (expected Lambda or lambda_inv)");
}

}  // namespace heatlab
