#include "fededs/optimizer.h"

#include <cmath>
#include <string>

#include "fededs/errors.h"

namespace fededs {

namespace {

void ValidateConfig(const OptimizerConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (c.momentum < 0.0 || c.momentum >= 1.0) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (c.weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
}

void CheckGroups(const OptimizerState& state, const ParamGroups& params,
                 const GradGroups& grads) {
  if (params.size() != state.first.size() || grads.size() != params.size()) {
    throw DimensionError("optimizer expects " +
                         std::to_string(state.first.size()) +
                         " parameter groups");
  }
  for (size_t g = 0; g < params.size(); ++g) {
    if (params[g].size() != state.first[g].size() ||
        grads[g].size() != params[g].size()) {
      throw DimensionError("optimizer group " + std::to_string(g) +
                           " shape mismatch");
    }
  }
}

}  // namespace

OptimizerState OptimizerState::Create(const OptimizerConfig& config,
                                      const std::vector<size_t>& group_sizes) {
  ValidateConfig(config);
  OptimizerState state;
  state.config = config;
  for (size_t n : group_sizes) {
    state.first.emplace_back(n, 0.0);
    if (config.kind == OptimizerKind::kAdaptiveDecoupledDecay) {
      state.second.emplace_back(n, 0.0);
    }
  }
  return state;
}

void SgdMomentumStep(OptimizerState& state, const ParamGroups& params,
                     const GradGroups& grads) {
  if (state.config.kind != OptimizerKind::kMomentumSgd) {
    throw ConfigError("optimizer state is not momentum-sgd");
  }
  CheckGroups(state, params, grads);
  const double lr = state.config.learning_rate;
  const double rho = state.config.momentum;
  const double wd = state.config.weight_decay;
  for (size_t g = 0; g < params.size(); ++g) {
    std::vector<double>& buf = state.first[g];
    for (size_t i = 0; i < buf.size(); ++i) {
      double d = grads[g][i];
      if (wd != 0.0) d += wd * params[g][i];
      buf[i] = rho * buf[i] + d;
      params[g][i] -= lr * buf[i];
    }
  }
  ++state.steps;
}

void AdaptiveStep(OptimizerState& state, const ParamGroups& params,
                  const GradGroups& grads) {
  if (state.config.kind != OptimizerKind::kAdaptiveDecoupledDecay) {
    throw ConfigError("optimizer state is not adaptive-decoupled-decay");
  }
  CheckGroups(state, params, grads);
  ++state.steps;
  const double lr = state.config.learning_rate;
  const double wd = state.config.weight_decay;
  const double t = static_cast<double>(state.steps);
  const double c1 = 1.0 - std::pow(kAdaptiveBeta1, t);
  const double c2 = 1.0 - std::pow(kAdaptiveBeta2, t);
  for (size_t g = 0; g < params.size(); ++g) {
    std::vector<double>& m = state.first[g];
    std::vector<double>& v = state.second[g];
    for (size_t i = 0; i < m.size(); ++i) {
      const double grad = grads[g][i];
      m[i] = kAdaptiveBeta1 * m[i] + (1.0 - kAdaptiveBeta1) * grad;
      v[i] = kAdaptiveBeta2 * v[i] + (1.0 - kAdaptiveBeta2) * grad * grad;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      double p = params[g][i];
      if (wd != 0.0) p *= 1.0 - lr * wd;
      params[g][i] = p - lr * m_hat / (std::sqrt(v_hat) + kAdaptiveEpsilon);
    }
  }
}

void OptimizerStep(OptimizerState& state, const ParamGroups& params,
                   const GradGroups& grads) {
  if (state.config.kind == OptimizerKind::kMomentumSgd) {
    SgdMomentumStep(state, params, grads);
  } else {
    AdaptiveStep(state, params, grads);
  }
}

}  // namespace fededs
