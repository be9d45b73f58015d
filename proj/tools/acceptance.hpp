#pragma once

#include "config.hpp"

#include <string>
#include <vector>

namespace covspde::cli {

struct CriterionOutcome {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;  // measured quantities, one line
  json data;
  double seconds = 0.0;
};

inline constexpr int kCriteria = 11;

/// Runs criterion `id` (1-based). Library errors are caught and reported as failures.
CriterionOutcome run_criterion(int id);

/// "PASS c3 <title> | <detail> (1.2 s)"
std::string format_outcome(const CriterionOutcome& o);

}  // namespace covspde::cli
