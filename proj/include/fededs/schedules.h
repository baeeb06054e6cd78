#pragma once

#include <cstdint>

namespace fededs {

// Local-epoch annealing: E_max up to round t_alpha, linear integer descent
// to E_min by round t_beta, E_min afterwards.
struct EpochScheduleConfig {
  int64_t e_max = 5;
  int64_t e_min = 1;
  int64_t t_alpha = 1;
  int64_t t_beta = 3;

  void Validate() const;
};

// Sigmoid mixing between local cross-entropy and distillation with a
// cutoff epsilon below which distillation is switched off.
struct LambdaScheduleConfig {
  double m = 3.0;
  double epsilon = 0.01;

  void Validate() const;
};

struct LossWeights {
  double local = 1.0;    // lambda_c
  double distill = 0.0;  // lambda_dis
};

// Rounds are 1-indexed.
int64_t EpochsAt(const EpochScheduleConfig& cfg, int64_t round);
LossWeights LambdasAt(const LambdaScheduleConfig& cfg, int64_t round);

}  // namespace fededs
