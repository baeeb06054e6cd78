#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fededs/nn.h"

namespace fededs {

// The aggregated part of a model: extractor and classifier, flattened.
// Stochastic layers are per-client constants and never travel here.
struct TrainableParams {
  std::vector<double> extractor;
  std::vector<double> classifier;

  static TrainableParams From(const SegmentedParams& params);
  void AssignTo(SegmentedParams& params) const;
  bool SameShape(const TrainableParams& other) const;
  bool operator==(const TrainableParams& other) const = default;
};

std::vector<uint8_t> SerializeTrainable(const TrainableParams& params);
TrainableParams DeserializeTrainable(std::span<const uint8_t> bytes);

// p_k = n_k / sum(n).
std::vector<double> WeightsPk(std::span<const size_t> sample_counts);
std::vector<double> UniformWeights(size_t num_clients);

// sum_k w_k * theta_k, coordinate-wise.
TrainableParams FedAvgAggregate(std::span<const TrainableParams> clients,
                                std::span<const double> weights);

// Accumulated momentum weight |a|_1 of `steps` local momentum-SGD steps:
// (1/(1-rho)) * (steps - rho * (1 - rho^steps) / (1 - rho)), exactly
// `steps` when rho == 0.
double FedNovaNorm(size_t steps, double rho);

// (updated - incoming) / (eta * norm).
TrainableParams FedNovaDelta(const TrainableParams& updated,
                             const TrainableParams& incoming, double eta,
                             double norm);

// global + (sum_k norm_k / K) * eta * (sum_k delta_k / K). With
// `omit_eta` the eta factor is dropped, reproducing the unscaled server line.
TrainableParams FedNovaAggregate(const TrainableParams& global,
                                 std::span<const TrainableParams> deltas,
                                 std::span<const double> norms, double eta,
                                 bool omit_eta = false);

struct ConvergenceBoundInputs {
  double smoothness = 0.0;       // L
  double sigma2 = 0.0;           // gradient variance bound
  double beta2 = 1.0;            // dissimilarity multiplier, >= 1
  double kappa2 = 0.0;           // dissimilarity offset, >= 0
  double eta = 0.0;              // local learning rate
  int64_t e_min = 1;
  int64_t rounds = 1;            // T
  double loss_gap = 0.0;         // L_G(theta at t_beta) - L_inf
  std::vector<double> weights;   // p_k, summing to one
};

// Evaluates the optimization-error bound after checking the learning-rate
// condition eta * L <= min{1/(2 E_min), 1/sqrt(2 E_min (E_min-1)(2 beta^2+1))}
// (second term skipped when E_min == 1).
double ConvergenceBound(const ConvergenceBoundInputs& in);

}  // namespace fededs
