#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fededs/data.h"
#include "fededs/nn.h"
#include "fededs/optimizer.h"
#include "fededs/tensor.h"
#include "fededs/training.h"

namespace fededs {

// Shape-preserving data encryptor g(x) = x + net(x) with
// net: input -> hidden -> input. A small initial residual keeps it close to
// the identity map at the start of training.
struct EncryptorParams {
  DenseStack net;

  static EncryptorParams Create(size_t input_dim, size_t hidden,
                                Activation activation, uint64_t seed,
                                double residual_scale);
  size_t input_dim() const { return net.input_dim(); }
  bool operator==(const EncryptorParams& other) const = default;
};

void EncryptInto(const EncryptorParams& encryptor, std::span<const double> x,
                 std::span<double> out, DenseStack::Trace* trace);
Tensor Encrypt(const EncryptorParams& encryptor, const Tensor& x);

// Encrypted inputs from one client paired with the frozen model's soft
// predictions on them. Immutable once generated.
struct EncryptedDataset {
  size_t origin_client = 0;
  uint64_t stochastic_seed = 0;
  std::vector<Tensor> inputs;
  std::vector<std::vector<double>> soft_labels;

  size_t size() const { return inputs.size(); }
  void Validate() const;
  bool operator==(const EncryptedDataset& other) const = default;
};

std::vector<uint8_t> SerializeEncryptedDataset(const EncryptedDataset& data);
EncryptedDataset DeserializeEncryptedDataset(std::span<const uint8_t> bytes);

// Full batch up to `full_batch_limit` samples, otherwise consecutive
// minibatches of `batch_size`.
struct BatchRule {
  size_t full_batch_limit = 256;
  size_t batch_size = 32;

  Batches For(size_t n) const;
};

struct EncryptionConfig {
  int pretrain_epochs = 5;   // E_c
  int encryptor_epochs = 20;  // E_g
  OptimizerConfig pretrain_optimizer{OptimizerKind::kMomentumSgd, 0.01, 0.9,
                                     1e-4};
  OptimizerConfig encryptor_optimizer{OptimizerKind::kAdaptiveDecoupledDecay,
                                      0.001, 0.0, 0.01};
  size_t encryptor_hidden = 32;
  double residual_scale = 0.01;
  BatchRule batching;
  uint64_t encryptor_seed = 0;

  void Validate() const;
};

// Cross-entropy of the frozen stochastic-path model on encrypted inputs,
// averaged over the batch. Adds d(loss)/d(encryptor params) into grad when
// non-empty; the model itself receives no gradient.
double EncryptorCrossEntropy(const EncryptorParams& encryptor,
                             const SegmentedParams& frozen,
                             const StochasticLayer& stochastic,
                             const Dataset& dataset,
                             std::span<const size_t> batch,
                             std::span<double> grad);

// Plain-path cross-entropy descent on extractor and classifier. Returns the
// mean batch loss of each epoch.
std::vector<double> PretrainLocal(SegmentedParams& params,
                                  const Dataset& dataset, int epochs,
                                  OptimizerState& optimizer,
                                  const BatchRule& batching = {});

// Trains only the encryptor against the frozen model and its stochastic
// layer. Returns the mean batch loss of each epoch.
std::vector<double> TrainEncryptor(EncryptorParams& encryptor,
                                   const SegmentedParams& frozen,
                                   const StochasticLayer& stochastic,
                                   const Dataset& dataset, int epochs,
                                   OptimizerState& optimizer,
                                   const BatchRule& batching = {});

EncryptedDataset GenerateEncryptedDataset(const EncryptorParams& encryptor,
                                          const SegmentedParams& frozen,
                                          const StochasticLayer& stochastic,
                                          const Dataset& dataset,
                                          size_t origin_client);

struct EncryptedGeneration {
  EncryptedDataset data;
  EncryptorParams encryptor;
  SegmentedParams pretrained;  // frozen model that labelled `data`
  std::vector<double> pretrain_losses;
  std::vector<double> encryptor_losses;
};

// Pretrain from the incoming global segments, train the encryptor, emit the
// encrypted dataset, then restore the client's extractor and classifier to
// the global values. `client` carries the client's own stochastic layer.
EncryptedGeneration FedEncryptedDataGenerate(size_t client_id,
                                             SegmentedParams& client,
                                             const SegmentedParams& global,
                                             const Dataset& dataset,
                                             const EncryptionConfig& config);

}  // namespace fededs
