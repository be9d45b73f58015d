#pragma once

#include "config.hpp"

#include <string>
#include <vector>

namespace covspde::cli {

struct RunResult {
  json doc;  // "checks" holds one boolean per enabled check
  bool pass = true;
  std::vector<std::string> csv_header;
  std::vector<std::vector<double>> csv_rows;
};

/// Executes the pipeline named by `command` (a subcommand or the configured
/// observable kind). Numerical preconditions propagate as covspde::Error.
RunResult run_experiment(const ExperimentConfig& cfg, const std::string& command);

/// Fixed-format CSV (17 significant digits) of the result's table.
std::string to_csv(const RunResult& r);

json complex_json(cplx z);
json estimate_json(const SchwingerEstimate& e);

}  // namespace covspde::cli
