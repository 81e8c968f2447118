#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kcache {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Runs the full invariant suite: kernel oracles, exact equivalence, ledger
// identities, the reduced-vs-unreduced inequality agreements and the
// arithmetic-intensity asymptotes. `fault` names a deliberate defect for
// negative-control runs ("unsorted-gather"); empty means none. Throws
// std::invalid_argument on an unknown fault name.
std::vector<CheckResult> run_verification(std::uint64_t seed, const std::string& fault = "");

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace kcache
