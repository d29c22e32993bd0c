#include "heatlab/bounds.hpp"

#include <algorithm>
#include <functional>
#include <cmath>
#include <numbers>
#include <numeric>

#include "heatlab/errors.hpp"
#include "heatlab/random.hpp"

namespace heatlab {

namespace {

const double kStable = 0.05;

double default_c11(int d) { return std::pow(4.0 * std::numbers::pi, d / 2.0); }

void check_pairing(const KernelColumn& col, const Grid& grid) {
  if (col.values.empty()) throw DomainError("kernel column has no stored times");
  if (static_cast<std::size_t>(col.values.front().size()) != grid.size())
    throw DimensionError("kernel column and environment grids differ");
}

void require_lambda_speed(const EnvironmentField& field, const char* what) {
  if (field.theta != field.Lambda) throw DomainError(std::string(what) + " needs the speed measure theta = Lambda");
}

// Per-time extremum of f over the samples (max if upper, else min).
std::vector<CurvePoint> per_time(const std::vector<KernelSample>& samples, const KernelColumn& col,
                                 const std::function<double(const KernelSample&)>& f, bool upper,
                                 const std::function<bool(const KernelSample&)>& keep = nullptr) {
  std::vector<CurvePoint> out;
  for (std::size_t k = 0; k < col.times.size(); ++k) {
    CurvePoint c{col.times[k], upper ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity(), 0};
    for (const KernelSample& s : samples) {
      if (s.time_index != k || (keep && !keep(s))) continue;
      const double v = f(s);
      c.value = upper ? std::max(c.value, v) : std::min(c.value, v);
      ++c.samples;
    }
    if (c.samples > 0) out.push_back(c);
  }
  return out;
}

std::vector<CurvePoint> from_time(const std::vector<CurvePoint>& curve, double t0) {
  std::vector<CurvePoint> out;
  for (const CurvePoint& c : curve)
    if (c.t >= t0) out.push_back(c);
  return out;
}

double extremum(const std::vector<CurvePoint>& curve, bool upper) {
  double v = upper ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
  for (const CurvePoint& c : curve) v = upper ? std::max(v, c.value) : std::min(v, c.value);
  return v;
}

void fill_ranges(BoundFit& fit, const std::vector<KernelSample>& samples, double t0) {
  fit.t_min = std::numeric_limits<double>::infinity();
  fit.r_min = std::numeric_limits<double>::infinity();
  fit.t_max = fit.r_max = 0.0;
  for (const KernelSample& s : samples) {
    if (s.t < t0) continue;
    fit.t_min = std::min(fit.t_min, s.t);
    fit.t_max = std::max(fit.t_max, s.t);
    fit.r_min = std::min(fit.r_min, s.distance);
    fit.r_max = std::max(fit.r_max, s.distance);
  }
  if (!std::isfinite(fit.t_min)) fit.t_min = fit.r_min = 0.0;
}

void note_excluded(BoundFit& fit, const KernelColumn& col, double burn_in) {
  std::size_t excluded = 0;
  for (double t : col.times)
    if (t < burn_in) ++excluded;
  if (excluded > 0)
    fit.notes.push_back(std::to_string(excluded) + " stored time(s) below the burn-in t = " + std::to_string(burn_in) +
                        " excluded");
}

}  // namespace

Provenance provenance_of(const EnvironmentField& field, std::size_t source) {
  Provenance p;
  p.seed = field.seed;
  p.dim = field.grid.dim();
  p.cells_per_side = field.grid.cells_per_side();
  p.spacing = field.grid.spacing();
  p.source = source;
  if (field.theta == field.Lambda)
    p.speed = "Lambda";
  else if ((field.theta.array() == 1.0).all())
    p.speed = "unit";
  else
    p.speed = "independent";
  return p;
}

std::vector<KernelSample> collect_samples(const KernelColumn& col, const Grid& grid, const MetricField* metric,
                                          const SampleRange& range) {
  check_pairing(col, grid);
  if (metric && metric->source != col.source)
    throw DomainError("pairing error: metric source " + std::to_string(metric->source) + " differs from kernel source " +
                      std::to_string(col.source));
  const double rmax = range.max_distance > 0.0 ? range.max_distance : grid.side() / 4.0;
  std::vector<double> dist(grid.size());
  for (std::size_t y = 0; y < grid.size(); ++y) dist[y] = grid.distance(col.source, y);
  std::vector<KernelSample> out;
  for (std::size_t k = 0; k < col.times.size(); ++k) {
    const double t = col.times[k];
    if (t < range.t_min || t > range.t_max) continue;
    const Vec& p = col.values[k];
    const double floor = range.resolve_floor * p.maxCoeff();
    for (std::size_t y = 0; y < grid.size(); ++y) {
      const auto i = static_cast<Eigen::Index>(y);
      if (dist[y] > rmax || !(p[i] >= floor) || !(p[i] > 0.0)) continue;
      out.push_back({k, t, p[i], dist[y], metric ? metric->distance[i] : std::numeric_limits<double>::quiet_NaN()});
    }
  }
  return out;
}

double dyadic_burn_in(std::span<const CurvePoint> curve, bool upper) {
  if (curve.size() < 2) return std::numeric_limits<double>::infinity();
  std::vector<double> tail(curve.size());
  tail.back() = curve.back().value;
  for (std::size_t k = curve.size() - 1; k-- > 0;)
    tail[k] = upper ? std::max(tail[k + 1], curve[k].value) : std::min(tail[k + 1], curve[k].value);
  std::size_t start = curve.size() - 1;
  for (std::size_t k = curve.size() - 1; k-- > 0;) {
    if (!(std::abs(tail[k] - tail[k + 1]) < kStable * std::max(std::abs(tail[k]), std::abs(tail[k + 1])))) break;
    start = k;
  }
  if (start == curve.size() - 1) return std::numeric_limits<double>::infinity();
  return curve[start].t;
}

double trend_slope(std::span<const CurvePoint> curve) {
  if (curve.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const CurvePoint& c : curve) {
    const double x = std::log(c.t);
    sx += x;
    sy += c.value;
    sxx += x * x;
    sxy += x * c.value;
  }
  const double n = static_cast<double>(curve.size());
  const double den = n * sxx - sx * sx;
  return den > 0 ? (n * sxy - sx * sy) / den : 0.0;
}

BoundFit verify_upper_intrinsic(const KernelColumn& col, const MetricField& metric, const EnvironmentField& field,
                                const SampleRange& range, const UpperOptions& options) {
  const int d = field.grid.dim();
  const auto samples = collect_samples(col, field.grid, &metric, range);
  BoundFit fit;
  fit.theorem = "upper-intrinsic";
  fit.provenance = provenance_of(field, col.source);
  if (samples.empty()) throw DomainError("verify_upper_intrinsic: no resolved samples");

  auto score = [d](const KernelSample& s, double gamma) {
    return std::log(s.p) + 0.5 * d * std::log(s.t) + s.metric * s.metric / (8.0 * s.t) -
           gamma * std::log1p(s.distance / std::sqrt(s.t));
  };
  auto fit_gamma = [&](double t0) {
    if (options.fixed_gamma >= 0.0) return options.fixed_gamma;
    double best = 0.0, best_spread = std::numeric_limits<double>::infinity();
    const int steps = static_cast<int>(std::round(options.gamma_max / options.gamma_step));
    for (int i = 0; i <= steps; ++i) {
      const double g = i * options.gamma_step;
      double sum = 0, sq = 0;
      std::size_t n = 0;
      for (const KernelSample& s : samples) {
        if (s.t < t0) continue;
        const double v = score(s, g);
        sum += v;
        sq += v * v;
        ++n;
      }
      if (n == 0) continue;
      const double mean = sum / n;
      const double spread = std::sqrt(std::max(0.0, sq / n - mean * mean));
      if (spread < best_spread - 1e-15) {
        best_spread = spread;
        best = g;
      }
    }
    return best;
  };
  auto curve_for = [&](double g) {
    return per_time(samples, col, [&](const KernelSample& s) { return score(s, g); }, true);
  };

  double gamma = fit_gamma(0.0);
  double burn = dyadic_burn_in(curve_for(gamma));
  if (std::isfinite(burn)) {
    gamma = fit_gamma(burn);
    burn = dyadic_burn_in(curve_for(gamma));
  }
  fit.burn_in = burn;
  fit.constants["gamma"] = gamma;
  fit.curve = curve_for(gamma);
  if (!std::isfinite(burn)) {
    fit.notes.push_back("worst log-ratio never stabilizes");
    fit.worst_log_ratio = extremum(fit.curve, true);
    return fit;
  }
  note_excluded(fit, col, burn);
  const auto tail = from_time(fit.curve, burn);
  fill_ranges(fit, samples, burn);
  fit.worst_log_ratio = extremum(tail, true);
  fit.constants["c1"] = std::exp(fit.worst_log_ratio);
  fit.trend_slope = trend_slope(tail);
  const double octaves = std::log2(tail.back().t / tail.front().t);
  fit.constants["octaves"] = octaves;
  if (octaves < options.min_octaves) fit.notes.push_back("fewer than the required octaves above burn-in");
  fit.pass = std::isfinite(fit.worst_log_ratio) && octaves >= options.min_octaves - 1e-12 &&
             fit.trend_slope <= options.max_slope;
  return fit;
}

BoundFit verify_upper_euclidean(const KernelColumn& col, const EnvironmentField& field, const SampleRange& range,
                                const EuclideanOptions& options) {
  require_lambda_speed(field, "verify_upper_euclidean");
  const int d = field.grid.dim();
  const auto samples = collect_samples(col, field.grid, nullptr, range);
  if (samples.empty()) throw DomainError("verify_upper_euclidean: no resolved samples");
  BoundFit fit;
  fit.theorem = "upper-euclidean";
  fit.provenance = provenance_of(field, col.source);

  auto curve_for = [&](double c) {
    return per_time(samples, col, [&](const KernelSample& s) {
      return std::log(s.p) + 0.5 * d * std::log(s.t) + c * s.distance * s.distance / s.t;
    }, true);
  };
  const double burn = dyadic_burn_in(curve_for(0.0));
  fit.burn_in = burn;
  if (!std::isfinite(burn)) {
    fit.notes.push_back("on-diagonal ratio never stabilizes");
    return fit;
  }
  note_excluded(fit, col, burn);
  auto log_c21 = [&](double c) { return extremum(from_time(curve_for(c), burn), true); };
  const double base = log_c21(0.0);
  const double target = base + std::log(options.slack);
  double lo = 0.0, hi = 2.0;
  if (log_c21(hi) <= target) {
    lo = hi;
  } else {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (log_c21(mid) <= target ? lo : hi) = mid;
    }
  }
  const double c22 = lo;
  fit.constants["c22"] = c22;
  fit.worst_log_ratio = log_c21(c22);
  fit.constants["c21"] = std::exp(fit.worst_log_ratio);
  fit.curve = from_time(curve_for(c22), burn);
  fit.trend_slope = trend_slope(fit.curve);
  fill_ranges(fit, samples, burn);
  const double octaves = std::log2(fit.curve.back().t / fit.curve.front().t);
  fit.constants["octaves"] = octaves;
  fit.pass = c22 >= options.min_c22 && fit.trend_slope <= 0.05 && octaves >= options.min_octaves - 1e-12;
  if (c22 < options.min_c22) fit.notes.push_back("no positive Gaussian rate fits");
  return fit;
}

BoundFit verify_lower(const KernelColumn& col, const EnvironmentField& field, const SampleRange& range,
                      const LowerOptions& options) {
  require_lambda_speed(field, "verify_lower");
  const int d = field.grid.dim();
  const auto samples = collect_samples(col, field.grid, nullptr, range);
  BoundFit fit;
  fit.theorem = "lower";
  fit.provenance = provenance_of(field, col.source);

  auto value = [d](const KernelSample& s, double c) {
    return std::log(s.p) + 0.5 * d * std::log(s.t) + c * s.distance * s.distance / s.t;
  };
  // Burn-in from the near-diagonal infimum.
  const auto near = per_time(samples, col, [&](const KernelSample& s) { return value(s, 0.0); }, false,
                             [](const KernelSample& s) { return s.distance <= 1.0; });
  const double burn = dyadic_burn_in(near, false);
  fit.burn_in = burn;
  if (!std::isfinite(burn)) {
    fit.notes.push_back("near-diagonal ratio never stabilizes");
    return fit;
  }
  auto admissible = [burn](const KernelSample& s) { return s.t >= burn * std::max(1.0, s.distance); };
  std::size_t count = 0;
  for (const KernelSample& s : samples) count += admissible(s);
  if (count == 0) throw DomainError("verify_lower: insufficient samples in the admissible cone");
  note_excluded(fit, col, burn);

  auto curve_for = [&](double c) {
    return per_time(samples, col, [&](const KernelSample& s) { return value(s, c); }, false, admissible);
  };
  auto log_c3 = [&](double c) { return extremum(curve_for(c), false); };
  const double cap = log_c3(options.c4_cap);
  const double target = cap + std::log(options.fraction);
  double lo = 0.0, hi = options.c4_cap;
  if (log_c3(0.0) >= target) {
    hi = 0.0;
  } else {
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (log_c3(mid) >= target ? hi : lo) = mid;
    }
  }
  const double c4 = hi;
  fit.constants["c4"] = c4;
  fit.worst_log_ratio = log_c3(c4);
  fit.constants["c3"] = std::exp(fit.worst_log_ratio);
  fit.curve = curve_for(c4);
  fill_ranges(fit, samples, burn);

  // Stability over the upper half of the admissible t-range on a log scale.
  const double mid_t = std::sqrt(fit.curve.front().t * fit.curve.back().t);
  double lo_v = std::numeric_limits<double>::infinity(), hi_v = -lo_v;
  std::size_t top = 0;
  for (const CurvePoint& c : fit.curve)
    if (c.t >= mid_t) {
      lo_v = std::min(lo_v, c.value);
      hi_v = std::max(hi_v, c.value);
      ++top;
    }
  fit.constants["top_half_spread"] = top > 0 ? std::exp(hi_v - lo_v) : 0.0;
  fit.trend_slope = trend_slope(fit.curve);
  if (top < 2) fit.notes.push_back("fewer than two admissible times in the top half of the range");
  fit.pass = std::isfinite(fit.worst_log_ratio) && fit.constants["c3"] > 0.0 && top >= 2 &&
             hi_v - lo_v <= std::log(options.stability);
  return fit;
}

double harnack_constant(const EnvironmentField& field, const Point& center, double radius, const HarnackParams& params) {
  if (radius > field.grid.side() / 2.0) throw DomainError("harnack_constant: radius exceeds L/2");
  const double c11 = params.c11 > 0.0 ? params.c11 : default_c11(field.grid.dim());
  const Vec inv_lambda = field.lambda.cwiseInverse();
  const double big = std::max(1.0, ball_norm(field.grid, field.Lambda, params.p, center, radius));
  const double small = std::max(1.0, ball_norm(field.grid, inv_lambda, params.q, center, radius));
  return c11 * std::exp(params.c12 * std::pow(big * small, params.kappa));
}

FloorCheck near_diagonal_floor(const KernelColumn& col, std::size_t time_index, const EnvironmentField& field,
                               const HarnackParams& params) {
  require_lambda_speed(field, "near_diagonal_floor");
  check_pairing(col, field.grid);
  if (time_index >= col.times.size()) throw DomainError("near_diagonal_floor: no such stored time");
  FloorCheck r;
  r.t = col.times[time_index];
  const double rt = std::sqrt(r.t);
  if (rt / 2.0 > field.grid.side() / 8.0) throw DomainError("near_diagonal_floor: ball exceeds box/8");
  const Point x0 = field.grid.position(col.source);
  r.harnack = harnack_constant(field, x0, rt, params);
  r.floor = std::pow(r.t, -0.5 * field.grid.dim()) / r.harnack;
  r.min_kernel = std::numeric_limits<double>::infinity();
  for (std::size_t y : field.grid.ball(x0, rt / 2.0))
    r.min_kernel = std::min(r.min_kernel, col.values[time_index][static_cast<Eigen::Index>(y)]);
  r.margin = r.min_kernel / r.floor;
  r.pass = r.margin >= 1.0;
  return r;
}

std::vector<double> long_range_times(const LongRangeOptions& options) {
  std::vector<double> t;
  for (double n : options.scales)
    for (double x : options.radii)
      for (double tau : options.relative_times) t.push_back(tau * n * n * x * x);
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end(), [](double a, double b) { return std::abs(a - b) <= 1e-12 * b; }), t.end());
  return t;
}

LongRangeFit verify_long_range(const KernelColumn& col, const EnvironmentField& field, const LongRangeOptions& options) {
  require_lambda_speed(field, "verify_long_range");
  check_pairing(col, field.grid);
  const Grid& grid = field.grid;
  const int d = grid.dim();
  const Point x0 = grid.position(col.source);
  auto time_index = [&](double t) {
    for (std::size_t k = 0; k < col.times.size(); ++k)
      if (std::abs(col.times[k] - t) <= 1e-12 * t) return k;
    throw DomainError("verify_long_range: column lacks time " + std::to_string(t));
  };
  LongRangeFit out;
  BoundFit& fit = out.fit;
  fit.theorem = "long-range";
  fit.provenance = provenance_of(field, col.source);
  fit.t_min = std::numeric_limits<double>::infinity();
  fit.r_min = std::numeric_limits<double>::infinity();
  for (double n : options.scales) {
    double sup = -std::numeric_limits<double>::infinity();
    for (double xn : options.radii) {
      if (n * xn > grid.side() / 4.0 + 1e-12) throw DomainError("verify_long_range: n|x| exceeds a quarter of the box");
      for (int j = 0; j < options.directions; ++j) {
        // Directions spread over the circle (d = 2) or a golden-angle spiral.
        Point dir{0, 0, 0};
        if (d == 2) {
          const double a = 2.0 * std::numbers::pi * (j + 0.5) / options.directions;
          dir = {std::cos(a), std::sin(a), 0};
        } else {
          const double z = 1.0 - 2.0 * (j + 0.5) / options.directions;
          const double a = j * std::numbers::pi * (3.0 - std::sqrt(5.0));
          dir = {std::sqrt(1 - z * z) * std::cos(a), std::sqrt(1 - z * z) * std::sin(a), z};
        }
        Point target{0, 0, 0};
        for (int a = 0; a < d; ++a) target[a] = x0[a] + n * xn * dir[a];
        // Nearest cell center; the bound is evaluated at its actual distance.
        CellCoords c{0, 0, 0};
        for (int a = 0; a < d; ++a) c[a] = static_cast<int>(std::lround(target[a] / grid.spacing()));
        const std::size_t y = grid.index(c);
        const double r = grid.distance(col.source, y);
        if (r <= 0.0) continue;
        for (double tau : options.relative_times) {
          const double t = tau * n * n * xn * xn;
          const std::size_t k = time_index(t);
          const double p = col.values[k][static_cast<Eigen::Index>(y)];
          if (!(p > 0.0) || p < options.resolve_floor * col.values[k].maxCoeff()) continue;
          const double lr = std::log(p) - d * std::log(n) + r * r / (2.0 * t);
          out.samples.push_back({n, r / n, t, p, lr});
          sup = std::max(sup, lr);
          fit.t_min = std::min(fit.t_min, t);
          fit.t_max = std::max(fit.t_max, t);
          fit.r_min = std::min(fit.r_min, r);
          fit.r_max = std::max(fit.r_max, r);
        }
      }
    }
    out.per_scale_constant.push_back(std::exp(sup));
    fit.curve.push_back({n, sup, 0});
  }
  if (out.samples.empty()) throw DomainError("verify_long_range: no resolved samples");
  fit.worst_log_ratio = -std::numeric_limits<double>::infinity();
  for (const auto& s : out.samples) fit.worst_log_ratio = std::max(fit.worst_log_ratio, s.log_ratio);
  const double shared = fit.curve.front().value;
  fit.constants["c23"] = std::exp(shared);
  fit.constants["log10_c23"] = shared / std::log(10.0);
  fit.constants["log10_c23_all"] = fit.worst_log_ratio / std::log(10.0);
  fit.burn_in = options.scales.front();
  bool shared_ok = std::isfinite(shared);
  for (const CurvePoint& c : fit.curve)
    if (c.value > shared + 1e-12) shared_ok = false;
  if (!shared_ok) fit.notes.push_back("constant fitted at the smallest scale does not bound larger scales");
  fit.notes.push_back("required constant grows like exp(r^2 / (4t)) as t / r^2 decreases");
  fit.pass = shared_ok;
  return out;
}

double sobolev_rho(int dim, double q) { return q * dim / (q * (dim - 2) + dim); }

double moser_kappa(int dim, const MomentExponents& exps) {
  const double p_star = exps.p / (exps.p - 1.0);
  const double r_star = exps.r / (exps.r - 1.0);
  const double rho = sobolev_rho(dim, exps.q);
  const double alpha = 1.0 + 1.0 / p_star - r_star / rho;
  if (!(alpha > 1.0)) throw ValidationError("Moser exponent undefined: alpha = " + std::to_string(alpha) + " <= 1");
  return 0.5 * p_star * alpha / (alpha - 1.0);
}

std::vector<Vec> sobolev_trial_functions(const Grid& grid, std::size_t count, std::uint64_t seed, double wavelength) {
  std::vector<Vec> out;
  const int d = grid.dim();
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, {0x50B0ULL, i});
    Vec u = Vec::Constant(static_cast<Eigen::Index>(grid.size()), standard_normal(rng));
    for (int m = 0; m < 4; ++m) {
      Point k{0, 0, 0};
      for (int a = 0; a < d; ++a) k[a] = 2.0 * std::numbers::pi * standard_normal(rng) / wavelength;
      const double phase = 2.0 * std::numbers::pi * uniform_open(rng);
      const double amp = standard_normal(rng);
      for (std::size_t c = 0; c < grid.size(); ++c) {
        const Point x = grid.position(c);
        double arg = phase;
        for (int a = 0; a < d; ++a) arg += k[a] * x[a];
        u[static_cast<Eigen::Index>(c)] += amp * std::cos(arg);
      }
    }
    out.push_back(std::move(u));
  }
  return out;
}

SobolevReport sobolev_probe(const EnvironmentField& field, const Point& center, double radius,
                            const MomentExponents& exps, std::span<const Vec> trials) {
  const Grid& grid = field.grid;
  const int d = grid.dim();
  if (radius > grid.side() / 2.0) throw DomainError("sobolev_probe: radius exceeds L/2");
  SobolevReport rep;
  rep.rho = sobolev_rho(d, exps.q);
  const double r_star = exps.r / (exps.r - 1.0);
  if (!(rep.rho > r_star))
    throw ValidationError("sobolev_probe: rho = " + std::to_string(rep.rho) + " <= r* = " + std::to_string(r_star));
  const double s = rep.rho / r_star;

  const auto cells = grid.ball(center, radius);
  const double volume = cells.size() * grid.cell_volume();
  Vec eta = Vec::Zero(static_cast<Eigen::Index>(grid.size()));
  for (std::size_t c : cells) {
    const double x = grid.distance(center, grid.position(c)) / radius;
    eta[static_cast<Eigen::Index>(c)] = std::pow(std::max(0.0, 1.0 - x * x), 2);
  }
  const DiscreteGenerator gen = assemble_generator(field);
  const double inv_lambda = ball_norm(grid, field.lambda.cwiseInverse(), exps.q, center, radius);
  const double theta_r = ball_norm(grid, field.theta, exps.r, center, radius);
  const double scale = std::pow(volume, 2.0 / d) * inv_lambda * std::pow(theta_r, 1.0 / s) / volume;
  for (const Vec& u : trials) {
    if (static_cast<std::size_t>(u.size()) != grid.size()) throw DimensionError("sobolev_probe: trial has wrong length");
    const Vec w = eta.cwiseProduct(u);
    const Vec w2 = w.cwiseProduct(w);
    const double lhs = ball_norm(grid, w2, s, center, radius, &field.theta);
    const double energy = dirichlet_energy(gen, w);
    const double ratio = energy > 0.0 ? lhs / (scale * energy) : 0.0;
    rep.ratios.push_back(ratio);
    rep.sup_ratio = std::max(rep.sup_ratio, ratio);
  }
  return rep;
}

MaximalReport maximal_inequality_probe(const DiscreteGenerator& gen, const Vec& psi, const Vec& f, std::size_t x0,
                                       const CylinderParams& cyl, const MomentExponents& exps, double kappa,
                                       const EvolveOptions& options) {
  if (!(cyl.sigma_prime >= 0.5 && cyl.sigma_prime < cyl.sigma && cyl.sigma <= 1.0))
    throw DomainError("maximal_inequality_probe: need 1/2 <= sigma' < sigma <= 1");
  if (!(cyl.epsilon > 0.0 && cyl.epsilon < 0.25)) throw DomainError("maximal_inequality_probe: need epsilon in (0, 1/4)");
  if (!(cyl.delta > 0.0 && cyl.delta <= 1.0)) throw DomainError("maximal_inequality_probe: need delta in (0, 1]");
  const Grid& grid = gen.grid;
  if (cyl.n > grid.side() / 2.0) throw DomainError("maximal_inequality_probe: cylinder exceeds the box");
  const EnvironmentField& field = *gen.field;
  const int d = grid.dim();
  const double p_star = exps.p / (exps.p - 1.0);

  MaximalReport rep;
  rep.kappa = kappa > 0.0 ? kappa : moser_kappa(d, exps);
  rep.h2 = h_squared(gen, psi);
  const Point c = grid.position(x0);
  rep.a_script = a_script(field, exps, c, cyl.n);

  const double T = cyl.delta * cyl.n * cyl.n;
  const double s1 = cyl.epsilon * T, s2 = (1.0 - cyl.epsilon) * T;
  auto interval = [&](double sigma) {
    return std::pair{(1.0 - sigma) * s1, (1.0 - sigma) * s2 + sigma * T};
  };
  const auto [a_sig, b_sig] = interval(cyl.sigma);
  const auto [a_half, b_half] = interval(0.5);
  std::vector<double> times;
  const int m = std::max(2, cyl.time_samples);
  for (int i = 0; i < m; ++i) {
    times.push_back(a_sig + (b_sig - a_sig) * i / (m - 1));
    times.push_back(a_half + (b_half - a_half) * i / (m - 1));
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<Vec> u;
  if (times.front() == 0.0) {
    const std::vector<double> rest(times.begin() + 1, times.end());
    u = evolve(gen, f, rest, options);
    u.insert(u.begin(), f);
  } else {
    u = evolve(gen, f, times, options);
  }
  const Vec weight = psi.array().exp().matrix();

  const auto half_cells = grid.ball(c, 0.5 * cyl.n);
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < a_half - 1e-12 || times[k] > b_half + 1e-12) continue;
    for (std::size_t y : half_cells) {
      const auto i = static_cast<Eigen::Index>(y);
      rep.max_v = std::max(rep.max_v, weight[i] * u[k][i]);
    }
  }
  // Trapezoid in time of ||v_t||^2_{2p*,B,theta} over I_sigma.
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] < a_sig - 1e-12 || times[k] > b_sig + 1e-12) continue;
    const Vec v = weight.cwiseProduct(u[k]);
    const double nv = ball_norm(grid, v, 2.0 * p_star, c, cyl.sigma * cyl.n, &field.theta);
    pts.emplace_back(times[k], nv * nv);
  }
  double integral = 0.0;
  for (std::size_t k = 1; k < pts.size(); ++k)
    integral += 0.5 * (pts[k].second + pts[k - 1].second) * (pts[k].first - pts[k - 1].first);
  rep.norm = std::sqrt(integral / (b_sig - a_sig));
  const double gap = cyl.sigma - cyl.sigma_prime;
  rep.factor = std::pow((1.0 + T * rep.h2) * rep.a_script / (cyl.epsilon * gap * gap), rep.kappa / p_star);
  rep.ratio = rep.max_v / (rep.factor * rep.norm);
  return rep;
}

}  // namespace heatlab
