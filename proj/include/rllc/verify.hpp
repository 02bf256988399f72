#pragma once

#include "rllc/config.hpp"

#include <string>
#include <vector>

namespace rllc {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Names accepted by run_verify_suite.
const std::vector<std::string>& verify_suite_names();

/// Runs one named property suite (equivalences, basis-independence,
/// abstract-rules, span-convergence, gradients) and returns one result per
/// check. Unknown names raise UsageError.
std::vector<CheckResult> run_verify_suite(const std::string& which);

}  // namespace rllc
