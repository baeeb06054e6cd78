#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fededs {

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckFloor = 1e-8;

struct GradCheckResult {
  std::string name;
  size_t num_params = 0;
  size_t checked = 0;  // coordinates above the floor
  double max_relative_error = 0.0;
  bool passed = false;
};

// Central finite differences of `loss` around `params` (perturbed in place
// and restored) against `analytic`. Coordinates where both magnitudes are
// below kGradCheckFloor are skipped.
GradCheckResult CheckGradient(const std::string& name, std::span<double> params,
                              std::span<const double> analytic,
                              const std::function<double()>& loss,
                              double step = kGradCheckStep,
                              double tolerance = kGradCheckTolerance);

// Checks every loss composition on a tiny seeded model: plain
// cross-entropy, encryptor cross-entropy through the stochastic path, KL
// distillation, the sampled combined loss and combined plus proximal.
std::vector<GradCheckResult> RunGradientChecks(uint64_t seed);

}  // namespace fededs
