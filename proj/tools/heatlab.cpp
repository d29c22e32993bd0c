#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "heatlab/errors.hpp"
#include "heatlab/parallel.hpp"
#include "heatlab/suites.hpp"

using namespace heatlab;

namespace {

enum Exit { kPass = 0, kFail = 1, kUsage = 2, kResource = 3 };

struct Common {
  int workers = 0;
};

struct Run {
  std::string command;
  json config = json::object();
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void manifest(const fs::path& dir) const {
    RunManifest m;
    m.command = command;
    m.config = config.dump();
    m.seeds = seeds;
    m.inputs = inputs;
    m.outputs = outputs;
    m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest(dir, m);
  }
};

fs::path dir_of(const fs::path& file) {
  return file.has_parent_path() ? file.parent_path() : fs::path(".");
}

std::size_t parse_cell(const Grid& grid, const std::vector<int>& x0) {
  if (x0.empty()) {
    const int c = grid.cells_per_side() / 2;
    return grid.index({c, c, grid.dim() > 2 ? c : 0});
  }
  if (static_cast<int>(x0.size()) != grid.dim())
    throw ValidationError("--x0 needs " + std::to_string(grid.dim()) + " comma-separated cell indices");
  CellCoords c{0, 0, 0};
  for (int a = 0; a < grid.dim(); ++a) {
    if (x0[a] < 0 || x0[a] >= grid.cells_per_side()) throw ValidationError("--x0 lies outside the grid");
    c[a] = x0[a];
  }
  return grid.index(c);
}

Point to_point(const std::vector<double>& v) {
  Point p{0, 0, 0};
  if (v.size() > 3) throw ValidationError("points have at most 3 coordinates");
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i];
  return p;
}

std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t prev = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cur = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, prev + (a[i - 1] != b[j - 1])});
      prev = cur;
    }
  }
  return row[b.size()];
}

// Closest long flag among the subcommand that was being parsed.
std::string suggestion(const CLI::App& app, const std::string& bad) {
  const CLI::App* sub = &app;
  while (true) {
    auto subs = sub->get_subcommands();
    if (subs.empty()) break;
    sub = subs.front();
  }
  std::string key = bad;
  while (!key.empty() && key.front() == '-') key.erase(0, 1);
  if (auto eq = key.find('='); eq != std::string::npos) key.resize(eq);
  std::string best;
  std::size_t best_d = 4;
  for (const CLI::Option* o : sub->get_options()) {
    for (const std::string& name : o->get_lnames()) {
      const std::size_t d = levenshtein(key, name);
      if (d < best_d) {
        best_d = d;
        best = "--" + name;
      }
    }
  }
  return best;
}

int verdict(bool pass) { return pass ? kPass : kFail; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heatlab: heat kernels of diffusions in degenerate random environments"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--workers", common.workers, "worker threads (default: HEATLAB_WORKERS or all cores)");
  int code = kPass;
  Run run;

  // env ------------------------------------------------------------------
  auto* env = app.add_subcommand("env", "generate and summarize environments");
  env->require_subcommand(1);

  std::string spec_path, out, env_dir, kern_dir, metric_dir, centers_path;
  std::optional<std::uint64_t> seed_override;
  auto* env_gen = env->add_subcommand("gen", "sample an environment field");
  env_gen->add_option("--spec", spec_path, "environment spec (JSON)")->required()->check(CLI::ExistingFile);
  env_gen->add_option("--seed", seed_override, "override the spec seed");
  env_gen->add_option("--out", out, "output directory")->required();
  env_gen->callback([&] {
    EnvironmentSpec spec = read_spec(spec_path);
    if (seed_override) spec.seed = *seed_override;
    const EnvironmentField field = generate_environment(spec, common.workers);
    write_field(out, field);
    run = {"env gen", {{"spec", to_json(spec)}}, {spec.seed}, {spec_path}, {out}, run.start};
    run.manifest(out);
  });

  std::vector<double> radii;
  auto* env_stats = env->add_subcommand("stats", "ball averages and global moments");
  env_stats->add_option("--env", env_dir, "environment directory")->required()->check(CLI::ExistingDirectory);
  env_stats->add_option("--centers", centers_path, "JSON array of points (default: the box center)")
      ->check(CLI::ExistingFile);
  env_stats->add_option("--radii", radii, "ball radii (default: 1, 2, 4, ... up to L/2)")->delimiter(',');
  env_stats->add_option("--out", out, "report (JSON)")->required();
  env_stats->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    if (radii.empty())
      for (double r = 1.0; r <= field.grid.side() / 2.0; r *= 2.0) radii.push_back(r);
    std::vector<Point> centers;
    if (!centers_path.empty()) {
      for (const auto& c : read_json(centers_path)) centers.push_back(to_point(c.get<std::vector<double>>()));
    } else {
      const double m = field.grid.side() / 2.0;
      centers.push_back({m, field.grid.dim() > 1 ? m : 0.0, field.grid.dim() > 2 ? m : 0.0});
    }
    const MomentReport rep = environment_stats(field, centers, radii);
    write_json(out, to_json(rep));
    run = {"env stats", {{"radii", radii}, {"centers", centers.size()}}, {field.seed}, {env_dir}, {out}, run.start};
    run.manifest(dir_of(out));
  });

  // op -------------------------------------------------------------------
  auto* op = app.add_subcommand("op", "assemble the generator");
  op->require_subcommand(1);
  std::string boundary = "periodic", mean = "harmonic";
  auto* op_export = op->add_subcommand("export", "write the generator in coordinate format");
  op_export->add_option("--env", env_dir, "environment directory")->required()->check(CLI::ExistingDirectory);
  op_export->add_option("--boundary", boundary, "periodic or dirichlet");
  op_export->add_option("--mean", mean, "edge mean: harmonic or arithmetic");
  op_export->add_option("--out", out, "output file (.coo)")->required();
  op_export->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const DiscreteGenerator gen = assemble_generator(field, {parse_boundary(boundary), parse_edge_mean(mean)});
    if (dir_of(out) != ".") fs::create_directories(dir_of(out));
    write_coo(out, gen.matrix());
    run = {"op export", {{"boundary", boundary}, {"mean", mean}}, {field.seed}, {env_dir}, {out}, run.start};
    run.manifest(dir_of(out));
  });

  // heat -----------------------------------------------------------------
  auto* heat = app.add_subcommand("heat", "heat kernels and random walks");
  heat->require_subcommand(1);
  std::vector<int> x0;
  std::vector<double> times{0.5, 1, 2};
  double tolerance = 1e-8;
  auto* heat_kernel = heat->add_subcommand("kernel", "p(t, x0, .) by Crank-Nicolson");
  heat_kernel->add_option("--env", env_dir, "environment directory")->required()->check(CLI::ExistingDirectory);
  heat_kernel->add_option("--x0", x0, "source cell (default: center)")->delimiter(',');
  heat_kernel->add_option("--times", times, "increasing times")->delimiter(',');
  heat_kernel->add_option("--tol", tolerance, "local error tolerance");
  heat_kernel->add_option("--boundary", boundary, "periodic or dirichlet");
  heat_kernel->add_option("--out", out, "output directory")->required();
  heat_kernel->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const DiscreteGenerator gen = assemble_generator(field, {parse_boundary(boundary), EdgeMean::harmonic});
    const std::size_t src = parse_cell(field.grid, x0);
    EvolveOptions eo;
    eo.tolerance = tolerance;
    const KernelColumn col = heat_kernel_column(gen, src, times, eo);
    write_kernel(out, col, field.grid);
    run = {"heat kernel", {{"source", src}, {"times", times}, {"tolerance", tolerance}, {"boundary", boundary}},
           {field.seed}, {env_dir}, {out}, run.start};
    run.manifest(out);
  });

  double t = 1.0;
  std::uint64_t paths = 100000, walker_seed = 7;
  auto* heat_walkers = heat->add_subcommand("walkers", "continuous-time random walk sampler");
  heat_walkers->add_option("--env", env_dir, "environment directory")->required()->check(CLI::ExistingDirectory);
  heat_walkers->add_option("--x0", x0, "source cell (default: center)")->delimiter(',');
  heat_walkers->add_option("--t", t, "time");
  heat_walkers->add_option("--paths", paths, "number of paths");
  heat_walkers->add_option("--seed", walker_seed, "master seed");
  heat_walkers->add_option("--kern", kern_dir, "kernel directory to compare against")->check(CLI::ExistingDirectory);
  heat_walkers->add_option("--out", out, "report (JSON)")->required();
  heat_walkers->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const DiscreteGenerator gen = assemble_generator(field);
    const std::size_t src = parse_cell(field.grid, x0);
    const WalkerResult w = simulate_walkers(gen, src, t, paths, walker_seed, common.workers);
    json j{{"source", w.source}, {"t", w.time},          {"paths", w.paths},
           {"killed", w.killed}, {"seed", w.seed},       {"jumps_per_path", w.jumps_per_path},
           {"mean", w.mean},     {"variance", w.variance}, {"counts", w.counts}};
    run = {"heat walkers", {{"source", src}, {"t", t}, {"paths", paths}}, {walker_seed}, {env_dir}, {out}, run.start};
    if (!kern_dir.empty()) {
      const KernelColumn col = read_kernel(kern_dir, field.grid);
      if (col.source != src) throw ValidationError("kernel source differs from --x0");
      const WalkerComparison c = compare_walkers(w, gen, col.at(t));
      j["tv"] = c.tv;
      j["bound"] = c.bound;
      j["pass"] = c.tv <= 3.0 * c.bound;
      code = verdict(c.tv <= 3.0 * c.bound);
      run.inputs.push_back(kern_dir);
    }
    write_json(out, j);
    run.manifest(dir_of(out));
  });

  // metric ---------------------------------------------------------------
  auto* metric = app.add_subcommand("metric", "intrinsic distance");
  metric->require_subcommand(1);
  int nbhd = 16;
  auto* metric_map = metric->add_subcommand("map", "d_theta(x0, .) by Dijkstra");
  metric_map->add_option("--env", env_dir, "environment directory")->required()->check(CLI::ExistingDirectory);
  metric_map->add_option("--x0", x0, "source cell (default: center)")->delimiter(',');
  metric_map->add_option("--nbhd", nbhd, "stencil size (2D: 4, 8, 16, 32, 48; 3D: 6, 18, 26)");
  metric_map->add_option("--out", out, "output directory")->required();
  metric_map->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const MetricField m = intrinsic_distance_map(field, parse_cell(field.grid, x0), nbhd);
    write_metric(out, m);
    run = {"metric map", {{"source", m.source}, {"nbhd", nbhd}}, {field.seed}, {env_dir}, {out}, run.start};
    run.manifest(out);
  });

  // verify ---------------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "fit and check heat kernel bounds");
  verify->require_subcommand(1);
  std::size_t time_index = 0;
  double radius = 4.0;
  std::vector<double> center;
  std::size_t trials = 50;
  CylinderParams cyl;
  auto kernel_inputs = [&](CLI::App* sub, bool need_metric) {
    sub->add_option("--env", env_dir, "environment directory")->required()->check(CLI::ExistingDirectory);
    sub->add_option("--kern", kern_dir, "kernel directory")->required()->check(CLI::ExistingDirectory);
    auto* m = sub->add_option("--metric", metric_dir, "metric directory")->check(CLI::ExistingDirectory);
    if (need_metric) m->required();
    sub->add_option("--out", out, "report (JSON)")->required();
  };
  auto finish_fit = [&](const std::string& name, const json& j, bool pass, std::uint64_t seed) {
    write_json(out, j);
    run.command = "verify " + name;
    run.seeds = {seed};
    run.inputs = {env_dir, kern_dir};
    if (!metric_dir.empty()) run.inputs.push_back(metric_dir);
    run.outputs = {out};
    run.manifest(dir_of(out));
    code = verdict(pass);
  };

  auto* v_upper = verify->add_subcommand("upper", "intrinsic Gaussian upper bound");
  kernel_inputs(v_upper, true);
  v_upper->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const KernelColumn col = read_kernel(kern_dir, field.grid);
    const BoundFit f = verify_upper_intrinsic(col, read_metric(metric_dir, field.grid), field);
    finish_fit("upper", to_json(f), f.pass, field.seed);
  });
  auto* v_euclid = verify->add_subcommand("upper-euclid", "Euclidean upper bound (theta = Lambda)");
  kernel_inputs(v_euclid, false);
  v_euclid->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const BoundFit f = verify_upper_euclidean(read_kernel(kern_dir, field.grid), field);
    finish_fit("upper-euclid", to_json(f), f.pass, field.seed);
  });
  auto* v_lower = verify->add_subcommand("lower", "Gaussian lower bound (theta = Lambda)");
  kernel_inputs(v_lower, false);
  v_lower->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const BoundFit f = verify_lower(read_kernel(kern_dir, field.grid), field);
    finish_fit("lower", to_json(f), f.pass, field.seed);
  });
  auto* v_long = verify->add_subcommand("longrange", "long-range bound (kernel stored at long_range_times)");
  kernel_inputs(v_long, false);
  std::vector<double> scales{2, 4, 8};
  v_long->add_option("--n", scales, "scales")->delimiter(',');
  v_long->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    LongRangeOptions lo;
    lo.scales = scales;
    const LongRangeFit f = verify_long_range(read_kernel(kern_dir, field.grid), field, lo);
    finish_fit("longrange", to_json(f), f.fit.pass, field.seed);
  });
  auto* v_floor = verify->add_subcommand("floor", "near-diagonal lower floor from the Harnack constant");
  kernel_inputs(v_floor, false);
  v_floor->add_option("--time-index", time_index, "stored time index");
  v_floor->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const FloorCheck f = near_diagonal_floor(read_kernel(kern_dir, field.grid), time_index, field);
    finish_fit("floor", to_json(f), f.pass, field.seed);
  });
  auto* v_sobolev = verify->add_subcommand("sobolev", "weighted Sobolev inequality probe");
  v_sobolev->add_option("--env", env_dir, "environment directory")->required()->check(CLI::ExistingDirectory);
  v_sobolev->add_option("--center", center, "ball center (default: box center)")->delimiter(',');
  v_sobolev->add_option("--radius", radius, "ball radius");
  v_sobolev->add_option("--trials", trials, "random trial functions");
  v_sobolev->add_option("--seed", walker_seed, "trial seed");
  v_sobolev->add_option("--out", out, "report (JSON)")->required();
  v_sobolev->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const double m = field.grid.side() / 2.0;
    const Point c = center.empty() ? Point{m, field.grid.dim() > 1 ? m : 0, field.grid.dim() > 2 ? m : 0} : to_point(center);
    const auto tr = sobolev_trial_functions(field.grid, trials, walker_seed, 2.0 * radius);
    const SobolevReport rep = sobolev_probe(field, c, radius, field.spec.exponents, tr);
    finish_fit("sobolev", to_json(rep), std::isfinite(rep.sup_ratio), field.seed);
  });
  auto* v_max = verify->add_subcommand("maximal", "maximal inequality probe on parabolic cylinders");
  v_max->add_option("--env", env_dir, "environment directory")->required()->check(CLI::ExistingDirectory);
  v_max->add_option("--x0", x0, "cylinder center cell (default: center)")->delimiter(',');
  v_max->add_option("--cyl-n", cyl.n, "cylinder radius n");
  v_max->add_option("--sigma-prime", cyl.sigma_prime, "inner cylinder fraction");
  v_max->add_option("--out", out, "report (JSON)")->required();
  v_max->callback([&] {
    const EnvironmentField field = read_field(env_dir);
    const DiscreteGenerator gen = assemble_generator(field);
    const std::size_t src = parse_cell(field.grid, x0);
    const Vec psi = Vec::Zero(static_cast<Eigen::Index>(gen.size()));
    const MaximalReport rep =
        maximal_inequality_probe(gen, psi, delta_density(gen, src), src, cyl, field.spec.exponents);
    finish_fit("maximal", to_json(rep), std::isfinite(rep.ratio), field.seed);
  });

  // stoch ----------------------------------------------------------------
  auto* stoch = app.add_subcommand("stoch", "stochastic ingredients");
  stoch->require_subcommand(1);
  std::vector<double> xvec{32, 0};
  double r_chain = 16.0, k_moment = 4.0;
  int sequences = 20;
  std::size_t count = 500;
  MomentExperimentOptions mo;
  std::string field_name = "Lambda", csv_path;

  auto* s_chain = stoch->add_subcommand("chain", "chained ergodic averages along a segment");
  s_chain->add_option("--spec", spec_path, "environment spec (JSON)")->required()->check(CLI::ExistingFile);
  s_chain->add_option("--x", xvec, "endpoint x")->delimiter(',');
  s_chain->add_option("--r", r_chain, "chain scale r");
  s_chain->add_option("--sequences", sequences, "random admissible sequences");
  s_chain->add_option("--out", out, "report (JSON)")->required();
  s_chain->callback([&] {
    const EnvironmentSpec spec = read_spec(spec_path);
    const EnvironmentField field = generate_environment(spec, common.workers);
    const ChainGeometry chain = chain_geometry(to_point(xvec), r_chain, spec.dim);
    const double m = field.grid.side() / 2.0;
    const Point origin{m, spec.dim > 1 ? m : 0, spec.dim > 2 ? m : 0};
    json rows = json::array();
    bool holder_ok = true;
    for (int j = 0; j < sequences; ++j) {
      Rng rng = make_rng(spec.seed, {0xC4A1, static_cast<std::uint64_t>(j)});
      const auto y = random_admissible_sequence(chain, origin, rng);
      const ChainedAverageReport rep = chained_average_bound(field, chain, y, origin, spec.exponents);
      holder_ok = holder_ok && rep.holder_lhs <= rep.holder_rhs * (1 + 1e-12);
      rows.push_back(to_json(rep));
    }
    write_json(out, {{"chain", to_json(chain)}, {"runs", rows}, {"holder_ok", holder_ok}});
    run = {"stoch chain", {{"spec", to_json(spec)}, {"x", xvec}, {"r", r_chain}, {"sequences", sequences}},
           {spec.seed}, {spec_path}, {out}, run.start};
    run.manifest(dir_of(out));
    code = verdict(holder_ok);
  });

  auto* s_ros = stoch->add_subcommand("rosenthal", "exhaustive Rosenthal ratios over random ensembles");
  s_ros->add_option("--k", k_moment, "moment order (> 2)");
  s_ros->add_option("--count", count, "ensembles");
  s_ros->add_option("--seed", walker_seed, "master seed");
  s_ros->add_option("--out", out, "report (JSON)")->required();
  s_ros->callback([&] {
    const RosenthalEnsemble e = rosenthal_ensemble(count, k_moment, walker_seed);
    write_json(out, to_json(e));
    run = {"stoch rosenthal", {{"k", k_moment}, {"count", count}}, {walker_seed}, {}, {out}, run.start};
    run.manifest(dir_of(out));
    code = verdict(e.pass);
  });

  auto* s_mom = stoch->add_subcommand("moments", "moment bound for sums over regions of K cubes");
  s_mom->add_option("--spec", spec_path, "environment spec (JSON)")->required()->check(CLI::ExistingFile);
  s_mom->add_option("--xi", mo.xi, "xi > 1");
  s_mom->add_option("--K", mo.K, "region sizes")->delimiter(',');
  s_mom->add_option("--samples", mo.samples, "environments M");
  s_mom->add_option("--bootstrap", mo.bootstrap, "bootstrap resamples");
  s_mom->add_option("--field", field_name, "Lambda or lambda_inv");
  s_mom->add_option("--csv", csv_path, "CSV of K, moment, CI");
  s_mom->add_option("--out", out, "report (JSON)")->required();
  s_mom->callback([&] {
    const EnvironmentSpec spec = read_spec(spec_path);
    mo.field = parse_moment_field(field_name);
    mo.workers = common.workers;
    const MomentExperimentReport rep = moment_bound_experiment(spec, mo);
    write_json(out, to_json(rep));
    run = {"stoch moments", {{"spec", to_json(spec)}, {"xi", mo.xi}, {"K", mo.K}, {"samples", mo.samples},
                             {"field", field_name}},
           {spec.seed}, {spec_path}, {out}, run.start};
    if (!csv_path.empty()) {
      std::vector<std::vector<double>> rows;
      for (const MomentRow& w : rep.rows)
        rows.push_back({static_cast<double>(w.K), w.moment, w.ratio, w.ci_lo, w.ci_hi});
      write_csv(csv_path, {"K", "moment", "ratio", "ci_lo", "ci_hi"}, rows);
      run.outputs.push_back(csv_path);
    }
    run.manifest(dir_of(out));
    code = verdict(rep.pass);
  });

  // green ----------------------------------------------------------------
  auto* green = app.add_subcommand("green", "Green's function scaling limit (d = 3)");
  green->require_subcommand(1);
  ScalingOptions so;
  std::vector<std::uint64_t> seeds;
  auto* g_limit = green->add_subcommand("limit", "e_n = sup |n^{d-2} g(x0, x0 + n x) - a g_BM(x)| over an annulus");
  g_limit->add_option("--spec", spec_path, "environment spec (JSON, d = 3)")->required()->check(CLI::ExistingFile);
  g_limit->add_option("--x0", x0, "source cell; only the box center is supported")->delimiter(',');
  g_limit->add_option("--r1", so.r1, "inner annulus radius");
  g_limit->add_option("--r2", so.r2, "outer annulus radius");
  g_limit->add_option("--n", so.scales, "scales")->delimiter(',');
  g_limit->add_option("--seeds", seeds, "environment seeds (default: spec seed)")->delimiter(',');
  g_limit->add_option("--paths", so.walker_paths, "walker paths for the covariance estimate");
  g_limit->add_option("--out", out, "curve (CSV); a JSON report is written next to it")->required();
  g_limit->callback([&] {
    const EnvironmentSpec spec = read_spec(spec_path);
    if (!x0.empty()) {
      const Grid grid(spec.dim, spec.cells_per_side, spec.spacing());
      if (parse_cell(grid, x0) != parse_cell(grid, {})) throw ValidationError("--x0: only the box center is supported");
    }
    so.seeds = seeds.empty() ? std::vector<std::uint64_t>{spec.seed} : seeds;
    so.workers = common.workers;
    const ScalingReport rep = scaling_limit_experiment(spec, so);
    std::vector<std::vector<double>> rows;
    for (const ScalingRun& r : rep.runs)
      for (std::size_t i = 0; i < rep.scales.size(); ++i)
        rows.push_back({static_cast<double>(r.seed), rep.scales[i], r.errors[i], r.wrong_errors.empty() ? 0.0 : r.wrong_errors[i]});
    write_csv(out, {"seed", "n", "e_n", "e_n_wrong_a"}, rows);
    fs::path report = fs::path(out).replace_extension(".json");
    write_json(report, to_json(rep));
    run = {"green limit", {{"spec", to_json(spec)}, {"r1", so.r1}, {"r2", so.r2}, {"n", so.scales}},
           so.seeds, {spec_path}, {out, report.string()}, run.start};
    run.manifest(dir_of(out));
    code = verdict(rep.pass);
  });

  // reproduce ------------------------------------------------------------
  std::string preset, size = "full";
  SuiteOptions suite;
  auto* repro = app.add_subcommand("reproduce", "run an acceptance suite with pinned seeds");
  repro->add_option("suite", preset, "one of: " + [] {
    std::string s;
    for (const auto& p : preset_names()) s += (s.empty() ? "" : ", ") + p;
    return s;
  }())->required();
  repro->add_option("--preset", size, "full or d2-small (fewer seeds for the d = 2 ensembles)")
      ->check(CLI::IsMember({"full", "d2-small"}));
  repro->add_option("--out", out, "output directory")->default_val("reproduce-out");
  repro->add_option("--max-seconds", suite.max_seconds, "time cap (exit 3 when exceeded)");
  repro->add_option("--max-memory-mb", suite.max_memory_mb, "memory cap (exit 3 when a suite would exceed it)");
  repro->add_flag("--inject-corruption", suite.corrupt, "negative control: perturb every kernel by 5%");
  repro->callback([&] {
    suite.small = size == "d2-small";
    suite.workers = common.workers;
    const SuiteReport rep = run_suite(preset, suite, [](const CriterionResult& r) {
      std::printf("[%s] %2d %-28s %s\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.summary.c_str());
      std::fflush(stdout);
    });
    fs::create_directories(out);
    write_json(fs::path(out) / "report.json", rep.to_json());
    run = {"reproduce " + preset,
           {{"suite", rep.preset}, {"preset", size}, {"corrupt", suite.corrupt}},
           {},
           {},
           {(fs::path(out) / "report.json").string()},
           run.start};
    run.manifest(out);
    code = verdict(rep.pass);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ExtrasError& e) {
    app.exit(e);
    for (int i = 1; i < argc; ++i) {
      const std::string arg = argv[i];
      if (arg.rfind("--", 0) != 0) continue;
      const std::string hint = suggestion(app, arg);
      if (!hint.empty() && hint != arg.substr(0, arg.find('='))) std::cerr << "did you mean " << hint << " instead of " << arg << "?\n";
    }
    return kUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << '\n';
    return kResource;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
  return code;
}
