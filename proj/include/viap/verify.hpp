#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace viap {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Self-check suite run by `viap verify`: finite-difference gradients,
/// shared-perturbation identity, kernel agreement, epsilon-ball and pixel
/// range invariants, attack reductions, t-test symmetry and file round-trips.
/// Uses small random models only; needs no dataset.
std::vector<CheckResult> run_invariant_suite(std::uint64_t seed);

}  // namespace viap
