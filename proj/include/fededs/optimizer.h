#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fededs {

enum class OptimizerKind { kMomentumSgd, kAdaptiveDecoupledDecay };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kMomentumSgd;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

// Constants of the adaptive optimizer.
inline constexpr double kAdaptiveBeta1 = 0.9;
inline constexpr double kAdaptiveBeta2 = 0.999;
inline constexpr double kAdaptiveEpsilon = 1e-8;

using ParamGroups = std::vector<std::span<double>>;
using GradGroups = std::vector<std::span<const double>>;

// Accumulators mirror the optimized groups one to one. `first` is the
// momentum buffer (SGD) or first moment; `second` is only used by the
// adaptive optimizer.
struct OptimizerState {
  OptimizerConfig config;
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  uint64_t steps = 0;

  static OptimizerState Create(const OptimizerConfig& config,
                               const std::vector<size_t>& group_sizes);
};

// buf <- rho * buf + (grad + wd * param); param <- param - lr * buf.
void SgdMomentumStep(OptimizerState& state, const ParamGroups& params,
                     const GradGroups& grads);

// Bias-corrected moment update with decay applied directly to the
// parameters: param <- param * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps).
void AdaptiveStep(OptimizerState& state, const ParamGroups& params,
                  const GradGroups& grads);

// Dispatches on state.config.kind.
void OptimizerStep(OptimizerState& state, const ParamGroups& params,
                   const GradGroups& grads);

}  // namespace fededs
