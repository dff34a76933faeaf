#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace icprobe {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Analytic-backend invariants and planted-effect recovery on the bundled
/// lexicons. Runs in seconds.
std::vector<CheckResult> run_selfcheck();

/// Prints one PASS/FAIL line per check; true when all passed.
bool print_checks(std::ostream& out, const std::vector<CheckResult>& checks);

}  // namespace icprobe
