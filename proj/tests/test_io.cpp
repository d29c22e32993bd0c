#include <doctest.h>

#include <fstream>
#include <random>

#include "heatlab/errors.hpp"
#include "heatlab/io.hpp"

using namespace heatlab;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("heatlab-test-" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

EnvironmentField sample_field() {
  EnvironmentSpec s;
  s.box_side = 8;
  s.cells_per_side = 16;
  s.dependence_range = 2;
  s.exponents = {5, 5, 2};
  s.seed = 42;
  return generate_environment(s);
}

void overwrite(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("spec JSON round trip") {
  EnvironmentSpec s;
  s.dim = 3;
  s.model = MarginalModel::blob;
  s.upper_tail = kNoTail;
  s.speed = SpeedMode::unit;
  s.seed = 77;
  const json j = to_json(s);
  CHECK(j["upper_tail"].is_null());
  const EnvironmentSpec r = spec_from_json(j);
  CHECK(r.dim == 3);
  CHECK(r.model == MarginalModel::blob);
  CHECK(std::isinf(r.upper_tail));
  CHECK(r.speed == SpeedMode::unit);
  CHECK(r.seed == 77);
  CHECK(to_json(r) == j);

  json bad = j;
  bad["colour"] = 1;
  CHECK_THROWS_AS(spec_from_json(bad), FormatError);
}

TEST_CASE("field, kernel and metric artifacts round trip") {
  TempDir tmp;
  const EnvironmentField f = sample_field();
  write_field(tmp.path / "env", f);
  const EnvironmentField g = read_field(tmp.path / "env");
  CHECK(g.seed == f.seed);
  CHECK(g.grid.cells_per_side() == 16);
  CHECK(g.theta == f.theta);
  for (int a = 0; a < 2; ++a) CHECK(g.diag_a[a] == f.diag_a[a]);

  const DiscreteGenerator gen = assemble_generator(f);
  const KernelColumn col = heat_kernel_column(gen, 5, std::vector<double>{0.5, 1.0});
  write_kernel(tmp.path / "kern", col, f.grid);
  const KernelColumn k = read_kernel(tmp.path / "kern", f.grid);
  CHECK(k.source == 5);
  CHECK(k.times == col.times);
  CHECK(k.values[1] == col.values[1]);
  CHECK_THROWS_AS(read_kernel(tmp.path / "kern", Grid(2, 8, 1.0)), DimensionError);

  const MetricField m = intrinsic_distance_map(f, 5, 8);
  write_metric(tmp.path / "met", m);
  const MetricField mr = read_metric(tmp.path / "met", f.grid);
  CHECK(mr.distance == m.distance);
  CHECK(mr.neighborhood == 8);

  // Reading one kind as another is refused.
  CHECK_THROWS_AS(read_metric(tmp.path / "kern", f.grid), FormatError);
}

TEST_CASE("corrupt artifacts") {
  TempDir tmp;
  write_field(tmp.path / "env", sample_field());
  const fs::path meta = tmp.path / "env" / "meta.json";
  overwrite(meta, "{\n  \"kind\": \"environment\",\n  \"seed\": \n}");
  try {
    read_field(tmp.path / "env");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }

  const fs::path raw = tmp.path / "short.f64";
  write_f64(raw, Vec::Ones(10));
  CHECK(read_f64(raw, 10) == Vec::Ones(10));
  CHECK_THROWS_AS(read_f64(raw, 11), FormatError);
  CHECK_THROWS(read_field(tmp.path / "missing"));
}

TEST_CASE("FNV-1a test vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("manifest contents") {
  TempDir tmp;
  RunManifest m;
  m.command = "env gen";
  m.config = "{\"seed\":1}";
  m.seeds = {1};
  m.outputs = {"a.f64"};
  write_manifest(tmp.path, m);
  const json j = read_json(tmp.path / "manifest.json");
  CHECK(j["command"] == "env gen");
  CHECK(j["seeds"] == json::array({1}));
  CHECK(j["config_hash"].get<std::string>().size() == 16);
  CHECK(j.contains("finished_utc"));
}

TEST_CASE("CSV writer") {
  TempDir tmp;
  write_csv(tmp.path / "t.csv", {"x", "y"}, {{1.0, 2.5}, {3.0, 4.0}});
  std::ifstream in(tmp.path / "t.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,y");
  std::getline(in, line);
  CHECK(line.rfind("1", 0) == 0);
}
