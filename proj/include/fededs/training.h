#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fededs/data.h"
#include "fededs/nn.h"
#include "fededs/optimizer.h"

namespace fededs {

using Batches = std::vector<std::vector<size_t>>;

// Consecutive index batches in dataset order; batch_size 0 means one full
// batch.
Batches SequentialBatches(size_t n, size_t batch_size);
// Batches over a seeded permutation of [0, n).
Batches ShuffledBatches(size_t n, size_t batch_size, uint64_t seed);

// Mean cross-entropy of the batch through the plain path (stochastic null)
// or through `stochastic`. Adds the gradient of the mean into `grads` when
// non-null.
double MeanCrossEntropy(const SegmentedParams& params,
                        const StochasticLayer* stochastic,
                        const Dataset& dataset, std::span<const size_t> batch,
                        ModelGrads* grads);

ParamGroups TrainableGroups(SegmentedParams& params);
GradGroups GradientGroups(const ModelGrads& grads);
OptimizerState TrainableOptimizer(const OptimizerConfig& config,
                                  const SegmentedParams& params);

// Fraction of samples whose arg-max prediction equals the label; ties go
// to the lowest class index.
double Accuracy(const SegmentedParams& params,
                const StochasticLayer* stochastic, const Dataset& dataset);

size_t ArgMax(std::span<const double> values);

}  // namespace fededs
