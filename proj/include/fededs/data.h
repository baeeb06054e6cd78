#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "fededs/tensor.h"

namespace fededs {

struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<size_t> labels;
  size_t num_classes = 0;

  size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }
  // Per-sample input width (all inputs share one shape).
  size_t input_dim() const { return inputs.empty() ? 0 : inputs.front().size(); }

  // Throws unless inputs and labels line up, shapes agree and every label
  // is below num_classes.
  void Validate() const;
  Dataset Subset(std::span<const size_t> indices) const;
  std::vector<size_t> ClassCounts() const;

  bool operator==(const Dataset& other) const = default;
};

struct SyntheticSpec {
  size_t num_classes = 5;
  size_t samples_per_class = 250;
  size_t input_dim = 16;
  double spread = 0.5;
  uint64_t seed = 1;
};

// Gaussian blobs around one unit-norm center per class. Samples are emitted
// class by class.
Dataset GenerateSynthetic(const SyntheticSpec& spec);

// Shuffles with `seed` and splits off round(fraction * n) samples as the
// holdout. Returns (train, holdout).
std::pair<Dataset, Dataset> SplitHoldout(const Dataset& dataset,
                                         double fraction, uint64_t seed);

struct PartitionSpec {
  double alpha = 0.0;
  size_t num_clients = 0;
  uint64_t seed = 0;
  // assignments[k] lists client k's sample indices in ascending order.
  std::vector<std::vector<size_t>> assignments;

  bool operator==(const PartitionSpec& other) const = default;
};

inline constexpr int kMaxPartitionAttempts = 100;

// Per-class Dirichlet(alpha) label-proportion partition. Counts come from
// largest-remainder rounding; a draw that leaves a client empty is retried
// with seed + attempt.
PartitionSpec DirichletPartition(std::span<const size_t> labels,
                                 size_t num_classes, double alpha,
                                 size_t num_clients, uint64_t seed);
PartitionSpec DirichletPartition(const Dataset& dataset, double alpha,
                                 size_t num_clients, uint64_t seed);

// Largest-remainder apportionment of `total` by `proportions`; ties go to
// the lower index.
std::vector<size_t> LargestRemainder(std::span<const double> proportions,
                                     size_t total);

// IDX image/label pair with pixel bytes scaled to [0, 1].
Dataset LoadIdxDataset(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path);

std::vector<uint8_t> SerializeDataset(const Dataset& dataset);
Dataset DeserializeDataset(std::span<const uint8_t> bytes);
std::vector<uint8_t> SerializePartition(const PartitionSpec& partition);
PartitionSpec DeserializePartition(std::span<const uint8_t> bytes);

}  // namespace fededs
