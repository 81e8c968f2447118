#include <cstdio>

#include "commands.hpp"
#include "kcache/verify.hpp"

int run_verify(const VerifyOptions& opt) {
  std::vector<kcache::CheckResult> results;
  try {
    results = kcache::run_verification(opt.seed, opt.inject_fault);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::size_t passed = 0;
  for (const auto& r : results) {
    std::printf("%s %-24s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    if (r.passed) {
      ++passed;
    }
  }
  std::printf("%zu/%zu properties passed\n", passed, results.size());
  return passed == results.size() ? kExitOk : kExitVerification;
}
