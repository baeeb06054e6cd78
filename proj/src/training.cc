#include "fededs/training.h"

#include <algorithm>
#include <numeric>

#include "fededs/errors.h"
#include "fededs/rng.h"

namespace fededs {

Batches SequentialBatches(size_t n, size_t batch_size) {
  Batches out;
  if (n == 0) return out;
  const size_t step = batch_size == 0 ? n : batch_size;
  for (size_t start = 0; start < n; start += step) {
    std::vector<size_t> batch(std::min(step, n - start));
    std::iota(batch.begin(), batch.end(), start);
    out.push_back(std::move(batch));
  }
  return out;
}

Batches ShuffledBatches(size_t n, size_t batch_size, uint64_t seed) {
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Batches out = SequentialBatches(n, batch_size);
  for (auto& batch : out) {
    for (size_t& i : batch) i = order[i];
  }
  return out;
}

double MeanCrossEntropy(const SegmentedParams& params,
                        const StochasticLayer* stochastic,
                        const Dataset& dataset, std::span<const size_t> batch,
                        ModelGrads* grads) {
  if (batch.empty()) throw ConfigError("empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  ForwardTrace trace;
  std::vector<double> grad_probs(params.layout.num_classes);
  std::vector<double> scaled(params.layout.num_classes);
  double total = 0.0;
  for (size_t i : batch) {
    ForwardInto(params, stochastic, dataset.inputs[i].data(), trace);
    total += CrossEntropy(trace.probs, dataset.labels[i]);
    if (grads) {
      CrossEntropyGrad(trace.probs, dataset.labels[i], grad_probs);
      for (size_t c = 0; c < scaled.size(); ++c) scaled[c] = grad_probs[c] * inv;
      BackwardFrom(params, stochastic, trace, scaled, grads, {});
    }
  }
  return total * inv;
}

ParamGroups TrainableGroups(SegmentedParams& params) {
  return {params.extractor.values(), params.classifier.values()};
}

GradGroups GradientGroups(const ModelGrads& grads) {
  return {grads.extractor, grads.classifier};
}

OptimizerState TrainableOptimizer(const OptimizerConfig& config,
                                  const SegmentedParams& params) {
  return OptimizerState::Create(
      config, {params.extractor.num_params(), params.classifier.num_params()});
}

size_t ArgMax(std::span<const double> values) {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

double Accuracy(const SegmentedParams& params,
                const StochasticLayer* stochastic, const Dataset& dataset) {
  if (dataset.empty()) throw ConfigError("accuracy needs a non-empty dataset");
  ForwardTrace trace;
  size_t correct = 0;
  for (size_t i = 0; i < dataset.size(); ++i) {
    ForwardInto(params, stochastic, dataset.inputs[i].data(), trace);
    if (ArgMax(trace.probs) == dataset.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

}  // namespace fededs
