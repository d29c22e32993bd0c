#pragma once

#include <functional>
#include <string>
#include <vector>

#include "heatlab/io.hpp"

namespace heatlab {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string summary;  // one line, measured values against the pinned thresholds
  json report;
  double seconds = 0.0;  // kept out of report.json
};

struct SuiteOptions {
  int workers = 0;
  // Reduced seed counts for the d = 2 ensembles.
  bool small = false;
  // Negative control: scale every computed kernel by 1.05 before comparison.
  bool corrupt = false;
  double max_seconds = 0.0;  // 0: no cap
  double max_memory_mb = 0.0;
};

using Criterion = std::function<CriterionResult(const SuiteOptions&)>;

struct CriterionInfo {
  int id;
  std::string name;
  double memory_mb;  // rough peak estimate used by the resource guard
  Criterion run;
};

// The thirteen acceptance criteria in order.
const std::vector<CriterionInfo>& criteria();

// Preset name -> criterion ids. Aliases: gaussian, upper, lower, longrange, green.
std::vector<std::string> preset_names();
std::vector<int> preset_criteria(const std::string& preset);

struct SuiteReport {
  std::string preset;
  std::vector<CriterionResult> results;
  bool pass = false;

  json to_json() const;
};

// Runs the criteria in order; throws ResourceError when a cap is exceeded.
SuiteReport run_suite(const std::string& preset, const SuiteOptions& options = {},
                      const std::function<void(const CriterionResult&)>& on_result = {});

}  // namespace heatlab
