#include "heatlab/io.hpp"

#include <bit>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "heatlab/errors.hpp"

namespace heatlab {

namespace {

json tail_json(double v) { return std::isinf(v) ? json(nullptr) : json(v); }

double tail_from(const json& j) {
  if (j.is_null()) return kNoTail;
  if (j.is_string() && (j == "inf" || j == "none")) return kNoTail;
  return j.get<double>();
}

json grid_json(const Grid& g) {
  return {{"dim", g.dim()}, {"cells_per_side", g.cells_per_side()}, {"spacing", g.spacing()}};
}

Grid grid_from(const json& j) {
  return Grid(j.at("dim").get<int>(), j.at("cells_per_side").get<int>(), j.at("spacing").get<double>());
}

void check_kind(const json& meta, const std::string& kind, const fs::path& where) {
  if (!meta.contains("format_version") || meta["format_version"] != kFormatVersion)
    throw FormatError(where.string() + ": unsupported or missing format_version");
  if (meta.value("kind", "") != kind)
    throw FormatError(where.string() + ": expected kind '" + kind + "', found '" + meta.value("kind", "") + "'");
}

void check_grid(const json& meta, const Grid& grid, const fs::path& where) {
  const Grid g = grid_from(meta.at("grid"));
  if (!(g == grid)) throw DimensionError(where.string() + ": grid differs from the environment grid");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

json to_json(const EnvironmentSpec& s) {
  return {{"dim", s.dim},
          {"box_side", s.box_side},
          {"cells_per_side", s.cells_per_side},
          {"dependence_range", s.dependence_range},
          {"model", to_string(s.model)},
          {"upper_tail", tail_json(s.upper_tail)},
          {"lower_tail", tail_json(s.lower_tail)},
          {"speed", to_string(s.speed)},
          {"speed_tail", tail_json(s.speed_tail)},
          {"exponents", {{"p", s.exponents.p}, {"q", s.exponents.q}, {"r", s.exponents.r}}},
          {"regime", to_string(s.regime)},
          {"seed", s.seed},
          {"mollify", s.mollify}};
}

EnvironmentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("environment spec must be a JSON object");
  static const std::vector<std::string> known{"dim",        "box_side", "cells_per_side", "dependence_range",
                                              "model",      "upper_tail", "lower_tail",   "speed",
                                              "speed_tail", "exponents", "regime",         "seed",
                                              "mollify"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw FormatError("unknown spec key '" + key + "'");
  EnvironmentSpec s;
  try {
    if (j.contains("dim")) s.dim = j["dim"].get<int>();
    if (j.contains("box_side")) s.box_side = j["box_side"].get<double>();
    if (j.contains("cells_per_side")) s.cells_per_side = j["cells_per_side"].get<int>();
    if (j.contains("dependence_range")) s.dependence_range = j["dependence_range"].get<double>();
    if (j.contains("model")) s.model = parse_marginal_model(j["model"].get<std::string>());
    if (j.contains("upper_tail")) s.upper_tail = tail_from(j["upper_tail"]);
    if (j.contains("lower_tail")) s.lower_tail = tail_from(j["lower_tail"]);
    if (j.contains("speed")) s.speed = parse_speed_mode(j["speed"].get<std::string>());
    if (j.contains("speed_tail")) s.speed_tail = tail_from(j["speed_tail"]);
    if (j.contains("exponents")) {
      const json& e = j["exponents"];
      s.exponents.p = e.value("p", s.exponents.p);
      s.exponents.q = e.value("q", s.exponents.q);
      s.exponents.r = e.value("r", s.exponents.r);
    }
    if (j.contains("regime")) s.regime = parse_moment_regime(j["regime"].get<std::string>());
    if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("mollify")) s.mollify = j["mollify"].get<bool>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("environment spec: ") + e.what());
  }
  return s;
}

EnvironmentSpec read_spec(const fs::path& path) { return spec_from_json(read_json(path)); }

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << std::setw(2) << j << '\n';
}

void write_f64(const fs::path& path, const Vec& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v[i]);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

Vec read_f64(const fs::path& path, std::size_t expected) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw FormatError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(double)) {
    std::ostringstream os;
    os << path.string() << ": expected " << expected * sizeof(double) << " bytes, found " << bytes;
    throw FormatError(os.str());
  }
  in.seekg(0);
  Vec v(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(bits);
  }
  return v;
}

void write_field(const fs::path& dir, const EnvironmentField& field) {
  ensure_dir(dir);
  json files = json::array();
  for (std::size_t a = 0; a < field.diag_a.size(); ++a) {
    const std::string name = "a" + std::to_string(a) + ".f64";
    write_f64(dir / name, field.diag_a[a]);
    files.push_back(name);
  }
  write_f64(dir / "theta.f64", field.theta);
  json meta{{"format_version", kFormatVersion},
            {"kind", "environment"},
            {"spec", to_json(field.spec)},
            {"seed", field.seed},
            {"grid", grid_json(field.grid)},
            {"files", {{"a", files}, {"theta", "theta.f64"}}}};
  write_json(dir / "meta.json", meta);
}

EnvironmentField read_field(const fs::path& dir) {
  const json meta = read_json(dir / "meta.json");
  check_kind(meta, "environment", dir / "meta.json");
  try {
    const Grid grid = grid_from(meta.at("grid"));
    std::vector<Vec> a;
    for (const auto& name : meta.at("files").at("a")) a.push_back(read_f64(dir / name.get<std::string>(), grid.size()));
    Vec theta = read_f64(dir / meta["files"].at("theta").get<std::string>(), grid.size());
    EnvironmentField f = EnvironmentField::from_arrays(grid, std::move(a), std::move(theta));
    f.spec = spec_from_json(meta.at("spec"));
    f.seed = meta.at("seed").get<std::uint64_t>();
    return f;
  } catch (const json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": " + e.what());
  }
}

void write_kernel(const fs::path& dir, const KernelColumn& col, const Grid& grid) {
  ensure_dir(dir);
  json files = json::array();
  for (std::size_t k = 0; k < col.values.size(); ++k) {
    const std::string name = "p_t" + std::to_string(k) + ".f64";
    write_f64(dir / name, col.values[k]);
    files.push_back(name);
  }
  json meta{{"format_version", kFormatVersion},
            {"kind", "kernel"},
            {"grid", grid_json(grid)},
            {"source", col.source},
            {"times", col.times},
            {"tolerance", col.tolerance},
            {"solver",
             {{"method", col.stats.method},
              {"accepted", col.stats.accepted},
              {"rejected", col.stats.rejected},
              {"min_step", col.stats.min_step},
              {"max_step", col.stats.max_step},
              {"step_cap", col.stats.step_cap}}},
            {"files", files}};
  write_json(dir / "meta.json", meta);
}

KernelColumn read_kernel(const fs::path& dir, const Grid& grid) {
  const json meta = read_json(dir / "meta.json");
  check_kind(meta, "kernel", dir / "meta.json");
  check_grid(meta, grid, dir / "meta.json");
  try {
    KernelColumn col;
    col.source = meta.at("source").get<std::size_t>();
    col.times = meta.at("times").get<std::vector<double>>();
    col.tolerance = meta.value("tolerance", 0.0);
    const json& s = meta.at("solver");
    col.stats.method = s.value("method", "");
    col.stats.accepted = s.value("accepted", std::size_t{0});
    col.stats.rejected = s.value("rejected", std::size_t{0});
    col.stats.min_step = s.value("min_step", 0.0);
    col.stats.max_step = s.value("max_step", 0.0);
    col.stats.step_cap = s.value("step_cap", 0.0);
    for (const auto& name : meta.at("files")) col.values.push_back(read_f64(dir / name.get<std::string>(), grid.size()));
    if (col.values.size() != col.times.size()) throw FormatError("kernel: file count differs from time count");
    return col;
  } catch (const json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": " + e.what());
  }
}

void write_metric(const fs::path& dir, const MetricField& m) {
  ensure_dir(dir);
  write_f64(dir / "d.f64", m.distance);
  json meta{{"format_version", kFormatVersion},
            {"kind", "metric"},
            {"grid", grid_json(m.grid)},
            {"source", m.source},
            {"neighborhood", m.neighborhood},
            {"refinement", m.refinement},
            {"files", {"d.f64"}}};
  write_json(dir / "meta.json", meta);
}

MetricField read_metric(const fs::path& dir, const Grid& grid) {
  const json meta = read_json(dir / "meta.json");
  check_kind(meta, "metric", dir / "meta.json");
  check_grid(meta, grid, dir / "meta.json");
  try {
    MetricField m;
    m.grid = grid;
    m.source = meta.at("source").get<std::size_t>();
    m.neighborhood = meta.at("neighborhood").get<int>();
    m.refinement = meta.value("refinement", 0);
    m.distance = read_f64(dir / "d.f64", grid.size());
    return m;
  } catch (const json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": " + e.what());
  }
}

void write_coo(const fs::path& path, const SparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "% rows cols nonzeros\n" << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.outerSize(); ++r)
    for (SparseMatrix::InnerIterator it(m, r); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n' << std::setprecision(17);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

json to_json(const MomentReport& r) {
  json curves = json::array();
  for (const BallCurve& c : r.curves)
    curves.push_back({{"center", c.center},
                      {"radii", c.radii},
                      {"Lambda_p", c.Lambda_p},
                      {"lambda_inv_q", c.lambda_inv_q},
                      {"burn_in", std::isinf(c.burn_in) ? json(nullptr) : json(c.burn_in)}});
  return {{"Lambda_p", r.Lambda_p},         {"lambda_inv_q", r.lambda_inv_q},
          {"theta_r", r.theta_r},           {"Lambda_p_theta_1mp", r.Lambda_p_theta_1mp},
          {"theta_inv", r.theta_inv},       {"Lambda_mean", r.Lambda_mean},
          {"curves", curves}};
}

json to_json(const Provenance& p) {
  return {{"seed", p.seed},     {"dim", p.dim},       {"cells_per_side", p.cells_per_side},
          {"spacing", p.spacing}, {"source", p.source}, {"speed", p.speed}};
}

namespace {
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
}  // namespace

json to_json(const BoundFit& f) {
  json constants = json::object();
  for (const auto& [k, v] : f.constants) constants[k] = finite_or_null(v);
  json curve = json::array();
  for (const CurvePoint& c : f.curve) curve.push_back({{"t", c.t}, {"value", finite_or_null(c.value)}, {"samples", c.samples}});
  return {{"theorem", f.theorem},
          {"pass", f.pass},
          {"constants", constants},
          {"t_range", {f.t_min, f.t_max}},
          {"r_range", {f.r_min, f.r_max}},
          {"worst_log_ratio", finite_or_null(f.worst_log_ratio)},
          {"burn_in", finite_or_null(f.burn_in)},
          {"trend_slope", f.trend_slope},
          {"curve", curve},
          {"notes", f.notes},
          {"provenance", to_json(f.provenance)}};
}

json to_json(const LongRangeFit& f) {
  json j = to_json(f.fit);
  j["per_scale_constant"] = json::array();
  for (double c : f.per_scale_constant) j["per_scale_constant"].push_back(finite_or_null(c));
  j["sample_count"] = f.samples.size();
  return j;
}

json to_json(const FloorCheck& f) {
  return {{"t", f.t},           {"harnack", f.harnack}, {"floor", f.floor},
          {"min_kernel", f.min_kernel}, {"margin", f.margin}, {"pass", f.pass}};
}

json to_json(const SobolevReport& r) { return {{"rho", r.rho}, {"sup_ratio", r.sup_ratio}, {"ratios", r.ratios}}; }

json to_json(const MaximalReport& r) {
  return {{"max_v", r.max_v},   {"norm", r.norm},   {"h2", r.h2},       {"a_script", r.a_script},
          {"kappa", r.kappa},   {"factor", r.factor}, {"ratio", r.ratio}};
}

json to_json(const MetricAudit& a) {
  return {{"triples", a.triples},
          {"triangle_violations", a.triangle_violations},
          {"worst_triangle_excess", a.worst_triangle_excess},
          {"symmetry_pairs", a.symmetry_pairs},
          {"worst_asymmetry", a.worst_asymmetry},
          {"sandwich_pairs", a.sandwich_pairs},
          {"lower_violations", a.lower_violations},
          {"upper_violations", a.upper_violations},
          {"lower_constant", a.lower_constant},
          {"upper_constant", a.upper_constant}};
}

json to_json(const LocalityReport& r) {
  return {{"spacings", r.spacings}, {"differences", r.differences}, {"orders", r.orders},
          {"converging", r.converging}, {"radii", r.radii}, {"ball_sup", r.ball_sup},
          {"small_balls_shrink", r.small_balls_shrink}};
}

json to_json(const CauchySlack& s) {
  return {{"lhs", s.lhs},   {"initial", s.initial}, {"h2", s.h2},
          {"rhs", s.rhs},   {"slack", s.slack},     {"sharp_rate", s.sharp_rate},
          {"sharp_rhs", s.sharp_rhs}, {"sharp_slack", s.sharp_slack}};
}

json to_json(const ChainGeometry& c) {
  return {{"x", c.x}, {"r", c.r}, {"length", c.length}, {"k", c.k}, {"ball_radius", c.ball_radius}, {"s", c.s}};
}

json to_json(const ChainedAverageReport& r) {
  return {{"k", r.k}, {"s", r.s}, {"sum", r.sum}, {"mean", r.mean},
          {"holder_lhs", r.holder_lhs}, {"holder_rhs", r.holder_rhs}};
}

json to_json(const RosenthalEnsemble& r) {
  return {{"k", r.k}, {"ensembles", r.ensembles}, {"max_ratio", r.max_ratio}, {"bound", r.bound}, {"pass", r.pass}};
}

json to_json(const MomentExperimentReport& r) {
  json rows = json::array();
  for (const MomentRow& w : r.rows)
    rows.push_back({{"K", w.K},
                    {"moment", w.moment},
                    {"ratio", w.ratio},
                    {"ci", {w.ci_lo, w.ci_hi}},
                    {"halves", {w.half_a, w.half_b}},
                    {"half_difference_ci", {w.diff_ci_lo, w.diff_ci_hi}}});
  return {{"xi", r.xi},
          {"exponent", r.exponent},
          {"mean", r.mean},
          {"samples", r.samples},
          {"rows", rows},
          {"max_over_min", r.max_over_min},
          {"max_over_min_ci", {r.max_over_min_ci_lo, r.max_over_min_ci_hi}},
          {"halves_agree", r.halves_agree},
          {"pass", r.pass}};
}

json to_json(const Covariance& s, int dim) {
  json m = json::array();
  for (int a = 0; a < dim; ++a) {
    json row = json::array();
    for (int b = 0; b < dim; ++b) row.push_back(s(a, b));
    m.push_back(row);
  }
  return m;
}

json to_json(const ScalingReport& r) {
  json runs = json::array();
  for (const ScalingRun& run : r.runs)
    runs.push_back({{"seed", run.seed},
                    {"a", run.a},
                    {"errors", run.errors},
                    {"wrong_a_errors", run.wrong_errors},
                    {"residual", run.residual},
                    {"iterations", run.iterations},
                    {"decreasing", run.decreasing}});
  return {{"scales", r.scales}, {"sigma", to_json(r.sigma, 3)}, {"runs", runs},
          {"pass", r.pass},     {"control_plateaus", r.control_plateaus}};
}

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
  std::ostringstream hash;
  hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a(m.config);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream stamp;
  stamp << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  json j{{"format_version", kFormatVersion},
         {"command", m.command},
         {"config_hash", hash.str()},
         {"config", json::parse(m.config, nullptr, false).is_discarded() ? json(m.config) : json::parse(m.config)},
         {"seeds", m.seeds},
         {"inputs", m.inputs},
         {"outputs", m.outputs},
         {"wall_clock_seconds", m.wall_clock},
         {"finished_utc", stamp.str()},
         {"versions", {{"heatlab", "1.0.0"}, {"format", kFormatVersion}}}};
  write_json(dir / "manifest.json", j);
}

}  // namespace heatlab
