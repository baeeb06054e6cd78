#include "fededs/schedules.h"

#include <cmath>

#include "fededs/errors.h"

namespace fededs {

void EpochScheduleConfig::Validate() const {
  if (!(e_max >= e_min && e_min >= 1)) {
    throw ConfigError("epoch schedule needs e_max >= e_min >= 1");
  }
  if (!(t_beta > t_alpha && t_alpha >= 1)) {
    throw ConfigError("epoch schedule needs t_beta > t_alpha >= 1");
  }
}

void LambdaScheduleConfig::Validate() const {
  if (!(m > 0.0)) throw ConfigError("lambda schedule steepness m must be positive");
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw ConfigError("lambda schedule epsilon must lie in (0, 0.5)");
  }
}

int64_t EpochsAt(const EpochScheduleConfig& cfg, int64_t round) {
  if (round < 1) throw ConfigError("rounds are 1-indexed");
  if (round <= cfg.t_alpha) return cfg.e_max;
  if (round > cfg.t_beta) return cfg.e_min;
  // Non-negative operands, so integer division is the floor.
  const int64_t drop = (cfg.e_max - cfg.e_min) * (round - cfg.t_alpha) /
                       (cfg.t_beta - cfg.t_alpha);
  return cfg.e_max - drop;
}

LossWeights LambdasAt(const LambdaScheduleConfig& cfg, int64_t round) {
  if (round < 1) throw ConfigError("rounds are 1-indexed");
  const double z = cfg.m * static_cast<double>(round - 1);
  const double decay = std::exp(-z);
  const double local = 1.0 / (1.0 + decay);
  const double distill = decay / (1.0 + decay);
  // The two cutoffs are complementary; testing only the distillation weight
  // keeps them firing at the same round.
  if (distill < cfg.epsilon) return {1.0, 0.0};
  return {local, 1.0 - local};
}

}  // namespace fededs
