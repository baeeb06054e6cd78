#include "fededs/data.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fededs/codec.h"
#include "fededs/errors.h"
#include "fededs/rng.h"

namespace fededs {

void Dataset::Validate() const {
  if (inputs.size() != labels.size()) {
    throw DimensionError("dataset has " + std::to_string(inputs.size()) +
                         " inputs but " + std::to_string(labels.size()) +
                         " labels");
  }
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].shape() != inputs.front().shape()) {
      throw DimensionError("dataset sample " + std::to_string(i) +
                           " has shape " + ShapeString(inputs[i].shape()));
    }
    if (labels[i] >= num_classes) {
      throw IndexError("dataset label " + std::to_string(labels[i]) +
                       " out of range for " + std::to_string(num_classes) +
                       " classes");
    }
  }
}

Dataset Dataset::Subset(std::span<const size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.inputs.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (size_t i : indices) {
    if (i >= size()) throw IndexError("subset index out of range");
    out.inputs.push_back(inputs[i]);
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<size_t> Dataset::ClassCounts() const {
  std::vector<size_t> counts(num_classes, 0);
  for (size_t y : labels) ++counts[y];
  return counts;
}

Dataset GenerateSynthetic(const SyntheticSpec& spec) {
  if (spec.num_classes == 0 || spec.samples_per_class == 0 ||
      spec.input_dim == 0) {
    throw ConfigError("synthetic dataset counts must be positive");
  }
  if (!(spec.spread >= 0.0)) throw ConfigError("spread must be non-negative");
  std::normal_distribution<double> normal(0.0, 1.0);

  Rng center_rng(DeriveSeed(spec.seed, "centers"));
  std::vector<std::vector<double>> centers(spec.num_classes);
  for (auto& c : centers) {
    double norm = 0.0;
    while (norm == 0.0) {
      c.assign(spec.input_dim, 0.0);
      for (double& v : c) v = normal(center_rng);
      norm = std::sqrt(std::inner_product(c.begin(), c.end(), c.begin(), 0.0));
    }
    for (double& v : c) v /= norm;
  }

  Rng noise_rng(DeriveSeed(spec.seed, "noise"));
  Dataset out;
  out.num_classes = spec.num_classes;
  for (size_t c = 0; c < spec.num_classes; ++c) {
    for (size_t i = 0; i < spec.samples_per_class; ++i) {
      std::vector<double> x(centers[c]);
      for (double& v : x) v += spec.spread * normal(noise_rng);
      out.inputs.emplace_back(std::vector<size_t>{spec.input_dim}, std::move(x));
      out.labels.push_back(c);
    }
  }
  return out;
}

std::pair<Dataset, Dataset> SplitHoldout(const Dataset& dataset,
                                         double fraction, uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0) {
    throw ConfigError("holdout fraction must lie in [0, 1)");
  }
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(DeriveSeed(seed, "holdout"));
  std::shuffle(order.begin(), order.end(), rng);
  const size_t n_hold = static_cast<size_t>(
      std::llround(fraction * static_cast<double>(dataset.size())));
  std::vector<size_t> hold(order.begin(), order.begin() + n_hold);
  std::vector<size_t> train(order.begin() + n_hold, order.end());
  std::sort(hold.begin(), hold.end());
  std::sort(train.begin(), train.end());
  return {dataset.Subset(train), dataset.Subset(hold)};
}

std::vector<size_t> LargestRemainder(std::span<const double> proportions,
                                     size_t total) {
  const size_t k = proportions.size();
  std::vector<size_t> counts(k, 0);
  std::vector<double> remainders(k, 0.0);
  size_t assigned = 0;
  for (size_t i = 0; i < k; ++i) {
    const double exact = proportions[i] * static_cast<double>(total);
    counts[i] = static_cast<size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  std::vector<size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return remainders[a] > remainders[b];
  });
  if (assigned > total) throw ConfigError("proportions sum above one");
  for (size_t j = 0; assigned < total; j = (j + 1) % k) {
    ++counts[order[j]];
    ++assigned;
  }
  return counts;
}

PartitionSpec DirichletPartition(std::span<const size_t> labels,
                                 size_t num_classes, double alpha,
                                 size_t num_clients, uint64_t seed) {
  if (labels.empty()) throw ConfigError("cannot partition an empty dataset");
  if (!(alpha > 0.0)) throw ConfigError("dirichlet alpha must be positive");
  if (num_clients < 2) throw ConfigError("partition needs at least 2 clients");
  if (labels.size() < num_clients) {
    throw ConfigError("cannot partition " + std::to_string(labels.size()) +
                      " samples over " + std::to_string(num_clients) +
                      " clients");
  }
  std::vector<std::vector<size_t>> by_class(num_classes);
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw IndexError("label out of range");
    by_class[labels[i]].push_back(i);
  }

  for (int attempt = 0; attempt < kMaxPartitionAttempts; ++attempt) {
    Rng rng(seed + static_cast<uint64_t>(attempt));
    std::gamma_distribution<double> gamma(alpha, 1.0);
    std::vector<std::vector<size_t>> assignments(num_clients);
    bool degenerate = false;
    for (size_t c = 0; c < num_classes && !degenerate; ++c) {
      std::vector<size_t> members = by_class[c];
      std::shuffle(members.begin(), members.end(), rng);
      std::vector<double> q(num_clients);
      double total = 0.0;
      for (double& v : q) {
        v = gamma(rng);
        total += v;
      }
      if (!(total > 0.0) || !std::isfinite(total)) {
        degenerate = true;
        break;
      }
      for (double& v : q) v /= total;
      const std::vector<size_t> counts = LargestRemainder(q, members.size());
      size_t cursor = 0;
      for (size_t k = 0; k < num_clients; ++k) {
        for (size_t j = 0; j < counts[k]; ++j) {
          assignments[k].push_back(members[cursor++]);
        }
      }
    }
    if (degenerate) continue;
    if (std::any_of(assignments.begin(), assignments.end(),
                    [](const auto& a) { return a.empty(); })) {
      continue;
    }
    for (auto& a : assignments) std::sort(a.begin(), a.end());
    return PartitionSpec{alpha, num_clients, seed, std::move(assignments)};
  }
  throw ConfigError("no partition without empty clients after " +
                    std::to_string(kMaxPartitionAttempts) + " draws");
}

PartitionSpec DirichletPartition(const Dataset& dataset, double alpha,
                                 size_t num_clients, uint64_t seed) {
  return DirichletPartition(dataset.labels, dataset.num_classes, alpha,
                            num_clients, seed);
}

namespace {

uint32_t ReadBigEndianU32(std::span<const uint8_t> bytes, size_t pos) {
  return (static_cast<uint32_t>(bytes[pos]) << 24) |
         (static_cast<uint32_t>(bytes[pos + 1]) << 16) |
         (static_cast<uint32_t>(bytes[pos + 2]) << 8) |
         static_cast<uint32_t>(bytes[pos + 3]);
}

constexpr uint32_t kIdxImagesMagic = 0x00000803;
constexpr uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

Dataset LoadIdxDataset(const std::filesystem::path& images_path,
                       const std::filesystem::path& labels_path) {
  const std::vector<uint8_t> images = ReadFileBytes(images_path);
  const std::vector<uint8_t> labels = ReadFileBytes(labels_path);
  const std::string img_name = images_path.string();
  const std::string lbl_name = labels_path.string();

  if (images.size() < 16) throw FormatError(img_name + ": truncated IDX header");
  if (ReadBigEndianU32(images, 0) != kIdxImagesMagic) {
    throw FormatError(img_name + ": bad IDX image magic");
  }
  if (labels.size() < 8) throw FormatError(lbl_name + ": truncated IDX header");
  if (ReadBigEndianU32(labels, 0) != kIdxLabelsMagic) {
    throw FormatError(lbl_name + ": bad IDX label magic");
  }
  const size_t n = ReadBigEndianU32(images, 4);
  const size_t rows = ReadBigEndianU32(images, 8);
  const size_t cols = ReadBigEndianU32(images, 12);
  const size_t n_labels = ReadBigEndianU32(labels, 4);
  if (n != n_labels) {
    throw FormatError(lbl_name + ": holds " + std::to_string(n_labels) +
                      " labels but " + img_name + " holds " +
                      std::to_string(n) + " images");
  }
  if (rows == 0 || cols == 0) throw FormatError(img_name + ": zero image dimension");
  const size_t pixels = rows * cols;
  if (images.size() != 16 + n * pixels) {
    throw FormatError(img_name + ": expected " + std::to_string(16 + n * pixels) +
                      " bytes, found " + std::to_string(images.size()));
  }
  if (labels.size() != 8 + n) {
    throw FormatError(lbl_name + ": expected " + std::to_string(8 + n) +
                      " bytes, found " + std::to_string(labels.size()));
  }
  Dataset out;
  size_t max_label = 0;
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> x(pixels);
    for (size_t p = 0; p < pixels; ++p) x[p] = images[16 + i * pixels + p] / 255.0;
    out.inputs.emplace_back(std::vector<size_t>{rows, cols}, std::move(x));
    out.labels.push_back(labels[8 + i]);
    max_label = std::max<size_t>(max_label, labels[8 + i]);
  }
  out.num_classes = std::max<size_t>(2, max_label + 1);
  return out;
}

std::vector<uint8_t> SerializeDataset(const Dataset& dataset) {
  dataset.Validate();
  if (dataset.num_classes > 0xffff) throw FormatError("too many classes for u16 labels");
  ByteWriter w(RecordType::kDataset);
  w.Count(dataset.size());
  w.Count(dataset.num_classes);
  const std::vector<size_t> shape =
      dataset.empty() ? std::vector<size_t>{} : dataset.inputs.front().shape();
  w.Count(shape.size());
  for (size_t d : shape) w.Count(d);
  for (const Tensor& x : dataset.inputs) w.F64s(x.data());
  for (size_t y : dataset.labels) w.U16(static_cast<uint16_t>(y));
  return w.Take();
}

Dataset DeserializeDataset(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, RecordType::kDataset, "dataset record");
  Dataset out;
  const size_t n = r.U32();
  out.num_classes = r.U32();
  const size_t rank = r.U32();
  std::vector<size_t> shape(rank);
  for (size_t& d : shape) d = r.U32();
  const size_t width = ShapeProduct(shape);
  for (size_t i = 0; i < n; ++i) out.inputs.emplace_back(shape, r.F64s(width));
  for (size_t i = 0; i < n; ++i) out.labels.push_back(r.U16());
  r.ExpectEnd();
  out.Validate();
  return out;
}

std::vector<uint8_t> SerializePartition(const PartitionSpec& partition) {
  ByteWriter w(RecordType::kPartition);
  w.Count(partition.num_clients);
  w.F64(partition.alpha);
  w.U64(partition.seed);
  for (const auto& a : partition.assignments) {
    w.Count(a.size());
    for (size_t i : a) w.Count(i);
  }
  return w.Take();
}

PartitionSpec DeserializePartition(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, RecordType::kPartition, "partition record");
  PartitionSpec out;
  out.num_clients = r.U32();
  out.alpha = r.F64();
  out.seed = r.U64();
  out.assignments.resize(out.num_clients);
  for (auto& a : out.assignments) {
    a.resize(r.U32());
    for (size_t& i : a) i = r.U32();
  }
  r.ExpectEnd();
  return out;
}

}  // namespace fededs
