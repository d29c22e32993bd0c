#include "heatlab/suites.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>

#include "heatlab/errors.hpp"
#include "heatlab/parallel.hpp"

namespace heatlab {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> dyadic(double lo, double hi) {
  std::vector<double> t;
  for (double v = lo; v <= hi * (1 + 1e-12); v *= 2) t.push_back(v);
  return t;
}

void corrupt_column(KernelColumn& col, const SuiteOptions& o) {
  if (!o.corrupt) return;
  for (Vec& v : col.values) v *= 1.05;
}

std::size_t center_cell(const Grid& g) {
  const int c = g.cells_per_side() / 2;
  return g.index({c, c, g.dim() > 2 ? c : 0});
}

EnvironmentSpec d2_spec(double L, int N, double R, std::uint64_t seed) {
  EnvironmentSpec s;
  s.dim = 2;
  s.box_side = L;
  s.cells_per_side = N;
  s.dependence_range = R;
  s.exponents = {5, 5, 2};
  s.seed = seed;
  return s;
}

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
  std::vector<std::uint64_t> s;
  for (std::uint64_t i = 1; i <= n; ++i) s.push_back(i);
  return s;
}

// ---- 1 ----------------------------------------------------------------

CriterionResult gaussian_sanity(const SuiteOptions& o) {
  CriterionResult r;
  const Grid grid(2, 256, 1.0 / 8.0);
  const DiscreteGenerator gen = assemble_generator(EnvironmentField::constant(grid, 1.0));
  const std::size_t x0 = center_cell(grid);
  const std::vector<double> times{0.5, 1, 2, 4};
  KernelColumn col = heat_kernel_column(gen, x0, times);
  corrupt_column(col, o);
  double worst = 0.0;
  json per_time = json::array();
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    double w = 0.0;
    for (std::size_t y = 0; y < grid.size(); ++y) {
      const double d = grid.distance(x0, y);
      if (d > 3.0 * std::sqrt(t)) continue;
      const double exact = std::exp(-d * d / (4 * t)) / (4 * std::numbers::pi * t);
      w = std::max(w, std::abs(col.values[k][static_cast<Eigen::Index>(y)] / exact - 1.0));
    }
    worst = std::max(worst, w);
    per_time.push_back({{"t", t}, {"max_relative_error", w}});
  }
  r.pass = worst <= 0.02;
  r.summary = fmt("max relative error %.4f (limit 0.02) for r <= 3 sqrt(t), t in [0.5, 4], N=256", worst);
  r.report = {{"max_relative_error", worst}, {"per_time", per_time}, {"steps", col.stats.accepted}};
  return r;
}

// ---- 2 ----------------------------------------------------------------

CriterionResult oracle_equivalence(const SuiteOptions& o) {
  CriterionResult r;
  const std::vector<double> times{0.5, 1, 2, 4};
  const std::vector<std::size_t> sources{0, 9, 18, 27, 36, 45, 54, 63};
  EvolveOptions eo;
  eo.tolerance = 1e-10;
  double err = 0.0, sym = 0.0, ck = 0.0;
  for (std::uint64_t seed : seed_range(20)) {
    const EnvironmentField field = generate_environment(d2_spec(8, 8, 2, seed), o.workers);
    const DiscreteGenerator gen = assemble_generator(field);
    const DenseSemigroup dense(gen);
    std::vector<KernelColumn> cols;
    for (std::size_t x : sources) {
      cols.push_back(heat_kernel_column(gen, x, times, eo));
      corrupt_column(cols.back(), o);
    }
    for (std::size_t k = 0; k < times.size(); ++k) {
      for (std::size_t i = 0; i < sources.size(); ++i) {
        err = std::max(err, (cols[i].values[k] - dense.column(sources[i], times[k])).cwiseAbs().maxCoeff());
        for (std::size_t j = 0; j < sources.size(); ++j)
          sym = std::max(sym, std::abs(cols[i].values[k][static_cast<Eigen::Index>(sources[j])] -
                                       cols[j].values[k][static_cast<Eigen::Index>(sources[i])]));
      }
    }
    ck = std::max(ck, chapman_kolmogorov_check(cols[0], gen, 0, 2, eo));
    ck = std::max(ck, chapman_kolmogorov_check(cols[3], gen, 1, 3, eo));
  }
  r.pass = err <= 1e-6 && ck <= 1e-8 && sym <= 1e-8;
  r.summary = fmt("max |CN - dense| %.2e (<= 1e-6), Chapman-Kolmogorov %.2e (<= 1e-8), symmetry %.2e (<= 1e-8), 20 seeds",
                  err, ck, sym);
  r.report = {{"max_abs_error", err}, {"chapman_kolmogorov", ck}, {"symmetry", sym}, {"seeds", 20},
              {"sources", sources}, {"tolerance", eo.tolerance}};
  return r;
}

// ---- 3 ----------------------------------------------------------------

CriterionResult conservation(const SuiteOptions& o) {
  CriterionResult r;
  double mass = 0.0, minimum = 0.0;
  std::size_t stored = 0;
  const std::vector<double> times = dyadic(0.25, 64);
  for (std::uint64_t seed : seed_range(3)) {
    const EnvironmentField field = generate_environment(d2_spec(64, 64, 4, seed), o.workers);
    for (SpeedMode mode : {SpeedMode::lambda, SpeedMode::unit}) {
      const DiscreteGenerator gen = assemble_generator(field.with_speed(mode));
      KernelColumn col = heat_kernel_column(gen, center_cell(field.grid), times);
      corrupt_column(col, o);
      for (const Vec& p : col.values) {
        mass = std::max(mass, std::abs(kernel_mass(gen, p) - 1.0));
        minimum = std::min(minimum, p.minCoeff());
        ++stored;
      }
    }
  }
  r.pass = mass <= 1e-9 && minimum >= -1e-12;
  r.summary = fmt("max |mass - 1| %.2e (<= 1e-9), min p %.2e (>= -1e-12) over %zu stored times", mass, minimum, stored);
  r.report = {{"max_mass_error", mass}, {"min_kernel", minimum}, {"stored_times", stored}};
  return r;
}

// ---- 4 ----------------------------------------------------------------

Vec smooth_field(const Grid& grid, Rng& rng, int modes) {
  Vec v = Vec::Zero(static_cast<Eigen::Index>(grid.size()));
  const double L = grid.side();
  for (int m = 0; m < modes; ++m) {
    const int kx = static_cast<int>(uniform_open(rng) * 3.0);
    const int ky = 1 + static_cast<int>(uniform_open(rng) * 2.0);
    const double amp = standard_normal(rng), phase = 2 * std::numbers::pi * uniform_open(rng);
    for (std::size_t x = 0; x < grid.size(); ++x) {
      const Point p = grid.position(x);
      v[static_cast<Eigen::Index>(x)] += amp * std::cos(2 * std::numbers::pi * (kx * p[0] + ky * p[1]) / L + phase);
    }
  }
  return v;
}

CriterionResult cauchy_bound(const SuiteOptions& o) {
  CriterionResult r;
  double worst = std::numeric_limits<double>::infinity(), worst_sharp = worst;
  int failures = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const EnvironmentField field = generate_environment(d2_spec(16, 16, 4, 1000 + i), o.workers);
    const DiscreteGenerator gen = assemble_generator(field);
    Rng rng = make_rng(i, {0xCA0C});
    const double beta = 0.2 + 1.3 * uniform_open(rng);
    Vec psi = beta * smooth_field(field.grid, rng, 3);
    psi.array() -= psi.mean();
    Vec f(static_cast<Eigen::Index>(gen.size()));
    for (Eigen::Index y = 0; y < f.size(); ++y) f[y] = uniform_open(rng);
    const Vec w = psi.array().exp().matrix();
    f /= std::sqrt(weighted_inner_product(w.cwiseProduct(f), w.cwiseProduct(f), gen));
    const double t = 0.1 + 1.9 * uniform_open(rng);
    const CauchySlack s = perturbed_l2_check(gen, psi, f, t);
    worst = std::min(worst, s.slack);
    worst_sharp = std::min(worst_sharp, s.sharp_slack);
    if (s.slack < -1e-9) ++failures;
  }
  r.pass = failures == 0;
  r.summary = fmt("min slack %.3e (>= -1e-9) over 100 triples on 16x16, %d violations", worst, failures);
  r.report = {{"min_slack", worst}, {"min_sharp_slack", worst_sharp}, {"violations", failures}, {"triples", 100}};
  return r;
}

// ---- 5 ----------------------------------------------------------------

CriterionResult metric_axioms(const SuiteOptions& o) {
  CriterionResult r;
  const int nb = 16;
  std::size_t triangle = 0, sandwich = 0, triples = 0, pairs = 0;
  json audits = json::array();
  for (std::uint64_t seed : seed_range(5)) {
    const EnvironmentField field = generate_environment(d2_spec(64, 64, 8, seed), o.workers);
    const MetricAudit a = audit_metric(field, nb, 10, 1000, 1000, seed);
    triangle += a.triangle_violations;
    sandwich += a.lower_violations + a.upper_violations;
    triples += a.triples;
    pairs += a.sandwich_pairs;
    json j = to_json(a);
    j["seed"] = seed;
    audits.push_back(j);
  }

  // Constant tensors: isotropic and diag(1, 4).
  const Grid grid(2, 64, 1.0);
  double axis = 0.0, random_pairs = 0.0;
  std::map<double, double> per_tensor;
  std::size_t sampled = 0;
  for (double a1 : {1.0, 4.0}) {
    Vec a0 = Vec::Ones(static_cast<Eigen::Index>(grid.size()));
    Vec a1v = Vec::Constant(static_cast<Eigen::Index>(grid.size()), a1);
    const EnvironmentField field =
        EnvironmentField::from_arrays(grid, {a0, a1v}, Vec::Ones(static_cast<Eigen::Index>(grid.size())));
    auto exact = [&](const Point& d) { return std::sqrt(d[0] * d[0] + d[1] * d[1] / a1); };
    Rng rng = make_rng(5, {0x3E7, static_cast<std::uint64_t>(a1)});
    for (int s = 0; s < 10; ++s) {
      const std::size_t x0 = static_cast<std::size_t>(uniform_open(rng) * grid.size());
      const MetricField m = intrinsic_distance_map(field, x0, nb);
      for (int axis_id = 0; axis_id < 2; ++axis_id)
        for (int step = 1; step < 32; ++step) {
          const std::size_t y = grid.shift(x0, axis_id, step);
          const double e = exact(grid.displacement(x0, y));
          axis = std::max(axis, std::abs(m.distance[static_cast<Eigen::Index>(y)] / e - 1.0));
        }
      for (int k = 0; k < 50; ++k) {
        std::size_t y = static_cast<std::size_t>(uniform_open(rng) * grid.size());
        if (y == x0) continue;
        const double e = exact(grid.displacement(x0, y));
        const double err = std::abs(m.distance[static_cast<Eigen::Index>(y)] / e - 1.0);
        per_tensor[a1] = std::max(per_tensor[a1], err);
        random_pairs = std::max(random_pairs, err);
        ++sampled;
      }
    }
  }
  const bool axes_exact = axis <= 1e-12;
  const bool random_ok = random_pairs <= 0.01;
  r.pass = triangle == 0 && sandwich == 0 && axes_exact && random_ok;
  r.summary = fmt("triangle violations %zu/%zu, sandwich violations %zu/%zu, axis error %.1e (exact), "
                  "random-pair error %.4f isotropic, %.4f for diag(1,4) (<= 0.01) at %d neighbours",
                  triangle, triples, sandwich, pairs, axis, per_tensor[1.0], per_tensor[4.0], nb);
  r.report = {{"triangle_violations", triangle}, {"sandwich_violations", sandwich},
              {"axis_relative_error", axis},     {"random_pair_relative_error", random_pairs},
              {"random_pair_error_isotropic", per_tensor[1.0]}, {"random_pair_error_diag_1_4", per_tensor[4.0]},
              {"random_pairs", sampled},         {"neighborhood", nb},
              {"audits", audits}};
  return r;
}

// ---- 6, 7 -------------------------------------------------------------

struct EnsembleMember {
  std::uint64_t seed;
  EnvironmentField field;  // theta = Lambda
  KernelColumn col_lambda, col_unit;
  MetricField metric_lambda, metric_unit;
};

const std::vector<EnsembleMember>& d2_ensemble(const SuiteOptions& o) {
  static std::map<std::pair<bool, bool>, std::vector<EnsembleMember>> cache;
  auto key = std::make_pair(o.small, o.corrupt);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  std::vector<EnsembleMember> members;
  const std::vector<double> times = dyadic(0.25, 64);
  for (std::uint64_t seed : seed_range(o.small ? 3 : 20)) {
    EnsembleMember m{seed, generate_environment(d2_spec(64, 64, 4, seed), o.workers), {}, {}, {}, {}};
    const std::size_t x0 = center_cell(m.field.grid);
    const EnvironmentField unit = m.field.with_speed(SpeedMode::unit);
    m.col_lambda = heat_kernel_column(assemble_generator(m.field), x0, times);
    m.col_unit = heat_kernel_column(assemble_generator(unit), x0, times);
    corrupt_column(m.col_lambda, o);
    corrupt_column(m.col_unit, o);
    m.metric_lambda = intrinsic_distance_map(m.field, x0, 16);
    m.metric_unit = intrinsic_distance_map(unit, x0, 16);
    members.push_back(std::move(m));
  }
  return cache.emplace(key, std::move(members)).first->second;
}

CriterionResult upper_intrinsic(const SuiteOptions& o) {
  CriterionResult r;
  const auto& ens = d2_ensemble(o);
  r.pass = true;
  json modes = json::object();
  std::string parts;
  for (const char* mode : {"Lambda", "unit"}) {
    const bool lam = std::string(mode) == "Lambda";
    auto fit_one = [&](const EnsembleMember& m, const UpperOptions& uo) {
      const EnvironmentField field = lam ? m.field : m.field.with_speed(SpeedMode::unit);
      return verify_upper_intrinsic(lam ? m.col_lambda : m.col_unit, lam ? m.metric_lambda : m.metric_unit, field,
                                    {}, uo);
    };
    // Fit gamma per seed, then re-verify every seed with the largest.
    double gamma = 0.0;
    for (const auto& m : ens) {
      const BoundFit f = fit_one(m, {});
      if (std::isfinite(f.constants.at("gamma"))) gamma = std::max(gamma, f.constants.at("gamma"));
    }
    UpperOptions shared;
    shared.fixed_gamma = gamma;
    json fits = json::array();
    int passed = 0;
    double worst_slope = -1e300, min_oct = 1e300, max_c1 = 0.0;
    for (const auto& m : ens) {
      const BoundFit f = fit_one(m, shared);
      passed += f.pass;
      worst_slope = std::max(worst_slope, f.trend_slope);
      min_oct = std::min(min_oct, f.constants.at("octaves"));
      max_c1 = std::max(max_c1, f.constants.at("c1"));
      fits.push_back(to_json(f));
    }
    const bool ok = passed == static_cast<int>(ens.size());
    r.pass = r.pass && ok;
    modes[mode] = {{"gamma", gamma}, {"passed", passed}, {"max_c1", max_c1}, {"fits", fits}};
    parts += fmt("%stheta=%s: %d/%zu pass, gamma %.2f, max slope %.3f (<= 0.05), min octaves %.1f (>= 3)",
                 parts.empty() ? "" : "; ", mode, passed, ens.size(), gamma, worst_slope, min_oct);
  }
  r.summary = parts;
  r.report = {{"seeds", ens.size()}, {"modes", modes}};
  return r;
}

CriterionResult lower_bound(const SuiteOptions& o) {
  CriterionResult r;
  const auto& ens = d2_ensemble(o);
  int passed = 0;
  double worst_spread = 1.0, min_c3 = 1e300;
  json fits = json::array();
  for (const auto& m : ens) {
    try {
      const BoundFit f = verify_lower(m.col_lambda, m.field);
      passed += f.pass;
      worst_spread = std::max(worst_spread, f.constants.at("top_half_spread"));
      min_c3 = std::min(min_c3, f.constants.at("c3"));
      fits.push_back(to_json(f));
    } catch (const DomainError& e) {
      fits.push_back({{"seed", m.seed}, {"error", e.what()}, {"pass", false}});
    }
  }
  r.pass = passed == static_cast<int>(ens.size());
  r.summary = fmt("%d/%zu seeds pass, min c3 %.4g (> 0), worst top-half spread %.4f (<= 1.10)", passed, ens.size(),
                  min_c3, worst_spread);
  r.report = {{"seeds", ens.size()}, {"passed", passed}, {"fits", fits}};
  return r;
}

// ---- 8 ----------------------------------------------------------------

CriterionResult long_range(const SuiteOptions& o) {
  CriterionResult r;
  LongRangeOptions lo;
  lo.scales = {2, 4, 8};
  const std::vector<double> times = long_range_times(lo);
  int passed = 0;
  const auto seeds = seed_range(o.small ? 2 : 5);
  json fits = json::array();
  double worst = -1e300;
  for (std::uint64_t seed : seeds) {
    const EnvironmentField field = generate_environment(d2_spec(64, 64, 4, seed), o.workers);
    KernelColumn col = heat_kernel_column(assemble_generator(field), center_cell(field.grid), times);
    corrupt_column(col, o);
    const LongRangeFit f = verify_long_range(col, field, lo);
    passed += f.fit.pass;
    worst = std::max(worst, f.fit.constants.at("log10_c23"));
    fits.push_back(to_json(f));
  }
  r.pass = passed == static_cast<int>(seeds.size());
  r.summary = fmt("%d/%zu seeds: c23 fitted at n=2 bounds n=4,8; max log10 c23 %.2f; t/(n|x|)^2 down to 0.01", passed,
                  seeds.size(), worst);
  r.report = {{"scales", lo.scales}, {"relative_times", lo.relative_times}, {"fits", fits}};
  return r;
}

// ---- 9 ----------------------------------------------------------------

CriterionResult moment_bound(const SuiteOptions& o) {
  CriterionResult r;
  EnvironmentSpec s;
  s.dim = 2;
  s.box_side = 192;
  s.cells_per_side = 192;
  s.dependence_range = 6;
  s.exponents = {2, 2, 1};
  s.upper_tail = 16;
  s.lower_tail = 16;
  s.regime = MomentRegime::none;
  s.seed = 1;
  MomentExperimentOptions mo;
  mo.workers = o.workers;
  const MomentExperimentReport rep = moment_bound_experiment(s, mo);
  r.pass = rep.pass;
  r.summary = fmt("max/min over K of moment/K^1.5 = %.3f, bootstrap 95%% CI [%.3f, %.3f] (<= 3), M=%zu", rep.max_over_min,
                  rep.max_over_min_ci_lo, rep.max_over_min_ci_hi, rep.samples);
  r.report = to_json(rep);
  r.report["spec"] = to_json(s);
  return r;
}

// ---- 10 ---------------------------------------------------------------

CriterionResult rosenthal(const SuiteOptions&) {
  CriterionResult r;
  json ens = json::array();
  bool ok = true;
  std::string parts;
  for (double k : {3.0, 4.0}) {
    const RosenthalEnsemble e = rosenthal_ensemble(500, k, 1);
    ok = ok && e.pass;
    ens.push_back(to_json(e));
    parts += fmt("k=%g max ratio %.3f <= %g; ", k, e.max_ratio, e.bound);
  }
  // n = 1: Lyapunov makes the ratio exactly 1.
  double n1 = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    Rng rng = make_rng(i, {0x0101});
    const DiscreteVariable v = random_centered_variable(rng, 2 + static_cast<int>(i % 3));
    for (double k : {3.0, 4.0}) n1 = std::max(n1, std::abs(rosenthal_check(std::span(&v, 1), k).ratio - 1.0));
  }
  // n = 2 Rademacher: E|S|^4 = 8 against max(2, 4), E|S|^3 = 4 against max(2, 2^1.5).
  const DiscreteVariable rad{{-1.0, 1.0}, {0.5, 0.5}};
  const std::vector<DiscreteVariable> pair{rad, rad};
  const double n2_k4 = std::abs(rosenthal_check(pair, 4.0).ratio - 2.0);
  const double n2_k3 = std::abs(rosenthal_check(pair, 3.0).ratio - std::sqrt(2.0));
  const bool exact = n1 <= 1e-12 && n2_k4 <= 1e-12 && n2_k3 <= 1e-12;
  r.pass = ok && exact;
  r.summary = parts + fmt("closed forms: n=1 %.1e, n=2 %.1e (exact to 1e-12)", n1, std::max(n2_k4, n2_k3));
  r.report = {{"ensembles", ens}, {"n1_error", n1}, {"n2_k4_error", n2_k4}, {"n2_k3_error", n2_k3},
              {"reported_constant", "2^k"}};
  return r;
}

// ---- 11 ---------------------------------------------------------------

CriterionResult chained_averages(const SuiteOptions& o) {
  CriterionResult r;
  const MomentExponents exps{5, 5, 2};
  const double rr = 32.0;
  const std::vector<double> lengths{32, 64, 128};
  const int sequences = 20;

  // Constant environment.
  const Grid grid(2, 512, 1.0);
  const EnvironmentField flat = EnvironmentField::constant(grid, 1.0);
  const Point origin = grid.position(center_cell(grid));
  double const_err = 0.0, holder = 0.0;
  for (double len : lengths) {
    const ChainGeometry c = chain_geometry({len, 0, 0}, rr, 2);
    Rng rng = make_rng(1, {0xC4A1, static_cast<std::uint64_t>(len)});
    const auto y = random_admissible_sequence(c, origin, rng);
    const ChainedAverageReport rep = chained_average_bound(flat, c, y, origin, exps);
    const_err = std::max(const_err, std::abs(rep.mean - 1.0));
  }

  double worst_ratio = 1.0, max_burn = 0.0;
  json seeds_j = json::array();
  bool ok = true;
  for (std::uint64_t seed : seed_range(5)) {
    const EnvironmentField field = generate_environment(d2_spec(512, 512, 4, seed), o.workers);
    const Point dir{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0};
    std::vector<std::pair<double, double>> ranges;  // min, max of sum/k per length
    std::vector<Point> centers;
    for (double len : lengths) {
      const ChainGeometry c = chain_geometry({len * dir[0], len * dir[1], 0}, rr, 2);
      double lo = 1e300, hi = 0.0;
      for (int j = 0; j < sequences; ++j) {
        Rng rng = make_rng(seed, {0xC4A1, static_cast<std::uint64_t>(len), static_cast<std::uint64_t>(j)});
        const auto y = random_admissible_sequence(c, origin, rng);
        const ChainedAverageReport rep = chained_average_bound(field, c, y, origin, exps);
        lo = std::min(lo, rep.mean);
        hi = std::max(hi, rep.mean);
        holder = std::max(holder, (rep.holder_lhs - rep.holder_rhs) / rep.holder_rhs);
      }
      ranges.emplace_back(lo, hi);
      for (const Point& p : c.points) centers.push_back({origin[0] + p[0], origin[1] + p[1], 0});
    }
    const std::vector<double> radii{1, 2, 4, 8, 16, 32, 64};
    const MomentReport stats = environment_stats(field, exps, centers, radii);
    double burn = 0.0;
    for (const BallCurve& c : stats.curves) burn = std::max(burn, c.burn_in);
    max_burn = std::max(max_burn, burn);
    double seed_ratio = 1.0;
    for (std::size_t i = 0; i + 1 < ranges.size(); ++i)
      seed_ratio = std::max({seed_ratio, ranges[i + 1].second / ranges[i].first, ranges[i].second / ranges[i + 1].first});
    worst_ratio = std::max(worst_ratio, seed_ratio);
    ok = ok && burn <= rr && seed_ratio <= 2.0;
    json rows = json::array();
    for (std::size_t i = 0; i < lengths.size(); ++i)
      rows.push_back({{"length", lengths[i]}, {"min_mean", ranges[i].first}, {"max_mean", ranges[i].second}});
    seeds_j.push_back({{"seed", seed}, {"burn_in", std::isfinite(burn) ? json(burn) : json(nullptr)},
                       {"worst_ratio", seed_ratio}, {"rows", rows}});
  }
  const bool holder_ok = holder <= 1e-12;
  r.pass = const_err <= 1e-12 && ok && holder_ok;
  r.summary = fmt("constant env |sum/k - 1| %.1e; worst sum/k ratio across k doubling %.3f (<= 2) with r=%g >= burn-in %.0f; "
                  "Hoelder excess %.1e (<= 1e-12)",
                  const_err, worst_ratio, rr, max_burn, std::max(holder, 0.0));
  r.report = {{"r", rr}, {"lengths", lengths}, {"sequences", sequences}, {"constant_error", const_err},
              {"holder_excess", holder}, {"seeds", seeds_j}};
  return r;
}

// ---- 12 ---------------------------------------------------------------

CriterionResult green_scaling(const SuiteOptions& o) {
  CriterionResult r;
  const int N = 96;
  const Grid grid(3, N, 1.0);
  const DiscreteGenerator gen =
      assemble_generator(EnvironmentField::constant(grid, 1.0), {Boundary::dirichlet, EdgeMean::harmonic});
  const std::size_t x0 = center_cell(grid);
  const Point c = grid.position(x0);
  GreenOptions go;
  go.boundary = [&](const Point& p) { return 1.0 / (4 * std::numbers::pi * grid.distance(c, p, false)); };
  const GreenField g = green_function(gen, x0, go);
  double control = 0.0;
  for (std::size_t y = 0; y < grid.size(); ++y) {
    const double d = grid.distance(x0, y, false);
    if (d < 4.0 || d > N / 8.0) continue;
    const double v = g.values[static_cast<Eigen::Index>(y)] * (o.corrupt ? 1.05 : 1.0);
    control = std::max(control, std::abs(v * 4 * std::numbers::pi * d - 1.0));
  }

  EnvironmentSpec s;
  s.dim = 3;
  s.box_side = N;
  s.cells_per_side = N;
  s.dependence_range = 4;
  s.exponents = {4, 4, 2};
  s.upper_tail = 8;
  s.lower_tail = 8;
  ScalingOptions so;
  so.workers = o.workers;
  if (o.small) so.seeds = {1, 2};
  const ScalingReport rep = scaling_limit_experiment(s, so);
  double worst_last = 0.0;
  for (const ScalingRun& run : rep.runs) worst_last = std::max(worst_last, run.errors.back() / run.errors.front());
  r.pass = control <= 0.03 && rep.pass && rep.control_plateaus;
  r.summary = fmt("constant control %.4f (<= 0.03); %zu seeds, worst e16/e4 %.3f (< 0.5), all decreasing %s; wrong-a "
                  "control plateaus %s",
                  control, rep.runs.size(), worst_last, rep.pass ? "yes" : "no", rep.control_plateaus ? "yes" : "no");
  r.report = to_json(rep);
  r.report["constant_control"] = {{"max_relative_error", control}, {"residual", g.residual}, {"iterations", g.iterations}};
  r.report["spec"] = to_json(s);
  return r;
}

// ---- 13 ---------------------------------------------------------------

CriterionResult walker_consistency(const SuiteOptions& o) {
  CriterionResult r;
  const EnvironmentField field = generate_environment(d2_spec(32, 32, 4, 1), o.workers);
  const DiscreteGenerator gen = assemble_generator(field);
  const std::size_t x0 = center_cell(field.grid);
  const double t = 4.0;
  EvolveOptions eo;
  eo.tolerance = 1e-10;
  const double span[] = {t};
  KernelColumn col = heat_kernel_column(gen, x0, span, eo);
  corrupt_column(col, o);
  const WalkerResult w = simulate_walkers(gen, x0, t, 1000000, 7, o.workers);
  const WalkerComparison c = compare_walkers(w, gen, col.values[0]);
  r.pass = c.tv <= 3.0 * c.bound;
  r.summary = fmt("TV %.5f vs 3 x multinomial bound %.5f, 10^6 paths on 32x32, t=%g", c.tv, 3 * c.bound, t);
  r.report = {{"tv", c.tv}, {"bound", c.bound}, {"paths", w.paths}, {"t", t}, {"seed", w.seed},
              {"jumps_per_path", w.jumps_per_path}};
  return r;
}

}  // namespace

const std::vector<CriterionInfo>& criteria() {
  static const std::vector<CriterionInfo> list{
      {1, "gaussian sanity", 60, gaussian_sanity},
      {2, "oracle equivalence", 10, oracle_equivalence},
      {3, "conservation and positivity", 20, conservation},
      {4, "perturbed Cauchy bound", 10, cauchy_bound},
      {5, "metric axioms", 30, metric_axioms},
      {6, "upper intrinsic bound", 120, upper_intrinsic},
      {7, "lower bound", 120, lower_bound},
      {8, "long-range bound", 30, long_range},
      {9, "moment bound", 200, moment_bound},
      {10, "Rosenthal inequality", 5, rosenthal},
      {11, "chained averages", 60, chained_averages},
      {12, "Green scaling", 500, green_scaling},
      {13, "walker consistency", 20, walker_consistency},
  };
  return list;
}

namespace {

const std::map<std::string, std::vector<int>>& preset_table() {
  static const std::map<std::string, std::vector<int>> t{
      {"gaussian-sanity", {1}}, {"oracle", {2, 3}},   {"cauchy", {4}},     {"metric", {5}},
      {"upper-d2", {6}},        {"lower-d2", {7}},    {"longrange-d2", {8}}, {"moments", {9}},
      {"rosenthal", {10}},      {"chain", {11}},      {"green-d3", {12}},  {"walkers", {13}},
      {"all", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13}},
  };
  return t;
}

std::string canonical(const std::string& name) {
  static const std::map<std::string, std::string> alias{{"gaussian", "gaussian-sanity"}, {"upper", "upper-d2"},
                                                        {"lower", "lower-d2"},           {"longrange", "longrange-d2"},
                                                        {"green", "green-d3"}};
  auto it = alias.find(name);
  return it == alias.end() ? name : it->second;
}

}  // namespace

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : preset_table()) out.push_back(k);
  return out;
}

std::vector<int> preset_criteria(const std::string& preset) {
  auto it = preset_table().find(canonical(preset));
  if (it == preset_table().end()) throw ValidationError("unknown preset '" + preset + "'");
  return it->second;
}

json SuiteReport::to_json() const {
  json rows = json::array();
  for (const CriterionResult& r : results)
    rows.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"summary", r.summary}, {"report", r.report}});
  return {{"format_version", kFormatVersion}, {"preset", preset}, {"pass", pass}, {"criteria", rows}};
}

SuiteReport run_suite(const std::string& preset, const SuiteOptions& options,
                      const std::function<void(const CriterionResult&)>& on_result) {
  SuiteReport rep;
  rep.preset = canonical(preset);
  const std::vector<int> ids = preset_criteria(preset);
  const auto start = Clock::now();
  rep.pass = true;
  for (int id : ids) {
    const CriterionInfo& info = criteria()[static_cast<std::size_t>(id - 1)];
    if (options.max_memory_mb > 0 && info.memory_mb > options.max_memory_mb)
      throw ResourceError(fmt("criterion %d needs about %.0f MB, cap is %.0f MB", id, info.memory_mb,
                              options.max_memory_mb));
    const auto t0 = Clock::now();
    CriterionResult r = info.run(options);
    r.id = id;
    r.name = info.name;
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    rep.pass = rep.pass && r.pass;
    if (on_result) on_result(r);
    rep.results.push_back(std::move(r));
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (options.max_seconds > 0 && elapsed > options.max_seconds)
      throw ResourceError(fmt("time cap of %.0f s exceeded after criterion %d (%.0f s)", options.max_seconds, id, elapsed));
  }
  return rep;
}

}  // namespace heatlab
