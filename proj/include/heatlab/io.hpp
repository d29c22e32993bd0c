#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "heatlab/bounds.hpp"
#include "heatlab/green.hpp"
#include "heatlab/stochastics.hpp"

namespace heatlab {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

json to_json(const EnvironmentSpec& spec);
// Missing keys keep their defaults; unknown keys are rejected.
EnvironmentSpec spec_from_json(const json& j);
EnvironmentSpec read_spec(const fs::path& path);

// Raw little-endian float64 arrays in row-major cell order.
void write_f64(const fs::path& path, const Vec& v);
Vec read_f64(const fs::path& path, std::size_t expected);

// meta.json + a0.f64 ... a{d-1}.f64 + theta.f64.
void write_field(const fs::path& dir, const EnvironmentField& field);
EnvironmentField read_field(const fs::path& dir);

// meta.json + p_t{k}.f64.
void write_kernel(const fs::path& dir, const KernelColumn& col, const Grid& grid);
KernelColumn read_kernel(const fs::path& dir, const Grid& grid);

// meta.json + d.f64.
void write_metric(const fs::path& dir, const MetricField& metric);
MetricField read_metric(const fs::path& dir, const Grid& grid);

// Generator in coordinate format: "row col value" lines after a header.
void write_coo(const fs::path& path, const SparseMatrix& m);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);
void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

json to_json(const MomentReport& r);
json to_json(const Provenance& p);
json to_json(const BoundFit& f);
json to_json(const LongRangeFit& f);
json to_json(const FloorCheck& f);
json to_json(const SobolevReport& r);
json to_json(const MaximalReport& r);
json to_json(const MetricAudit& a);
json to_json(const LocalityReport& r);
json to_json(const CauchySlack& s);
json to_json(const ChainGeometry& c);
json to_json(const ChainedAverageReport& r);
json to_json(const RosenthalEnsemble& r);
json to_json(const MomentExperimentReport& r);
json to_json(const ScalingReport& r);
json to_json(const Covariance& s, int dim);

std::uint64_t fnv1a(const std::string& data);

struct RunManifest {
  std::string command;
  std::string config;  // canonical configuration text; hashed
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_clock = 0.0;
};

// Writes manifest.json (the only place timestamps appear).
void write_manifest(const fs::path& dir, const RunManifest& m);

}  // namespace heatlab
