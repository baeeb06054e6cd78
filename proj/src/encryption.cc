#include "fededs/encryption.h"

#include <cmath>
#include <numeric>

#include "fededs/codec.h"
#include "fededs/errors.h"

namespace fededs {

EncryptorParams EncryptorParams::Create(size_t input_dim, size_t hidden,
                                        Activation activation, uint64_t seed,
                                        double residual_scale) {
  EncryptorParams p;
  p.net = DenseStack({input_dim, hidden, input_dim}, activation, false);
  Rng rng(seed);
  p.net.InitGlorot(rng);
  // Scale the output layer so the initial residual is small.
  const size_t first = input_dim * hidden + hidden;
  for (size_t i = first; i < p.net.num_params(); ++i) {
    p.net.values()[i] *= residual_scale;
  }
  return p;
}

void EncryptInto(const EncryptorParams& encryptor, std::span<const double> x,
                 std::span<double> out, DenseStack::Trace* trace) {
  encryptor.net.Forward(x, out, trace);
  for (size_t i = 0; i < x.size(); ++i) out[i] += x[i];
}

Tensor Encrypt(const EncryptorParams& encryptor, const Tensor& x) {
  std::vector<double> out(x.size());
  EncryptInto(encryptor, x.data(), out, nullptr);
  return Tensor(x.shape(), std::move(out));
}

void EncryptedDataset::Validate() const {
  if (inputs.size() != soft_labels.size()) {
    throw DimensionError("encrypted dataset inputs and soft labels differ in count");
  }
  for (const auto& label : soft_labels) {
    const double total = std::accumulate(label.begin(), label.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) {
      throw NumericError("encrypted soft label does not sum to one");
    }
  }
}

std::vector<uint8_t> SerializeEncryptedDataset(const EncryptedDataset& data) {
  data.Validate();
  ByteWriter w(RecordType::kEncryptedDataset);
  w.Count(data.origin_client);
  w.U64(data.stochastic_seed);
  w.Count(data.size());
  const std::vector<size_t> shape =
      data.inputs.empty() ? std::vector<size_t>{} : data.inputs.front().shape();
  w.Count(shape.size());
  for (size_t d : shape) w.Count(d);
  w.Count(data.soft_labels.empty() ? 0 : data.soft_labels.front().size());
  for (const Tensor& x : data.inputs) w.F64s(x.data());
  for (const auto& label : data.soft_labels) w.F64s(label);
  return w.Take();
}

EncryptedDataset DeserializeEncryptedDataset(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, RecordType::kEncryptedDataset, "encrypted dataset record");
  EncryptedDataset out;
  out.origin_client = r.U32();
  out.stochastic_seed = r.U64();
  const size_t n = r.U32();
  std::vector<size_t> shape(r.U32());
  for (size_t& d : shape) d = r.U32();
  const size_t classes = r.U32();
  const size_t width = ShapeProduct(shape);
  for (size_t i = 0; i < n; ++i) out.inputs.emplace_back(shape, r.F64s(width));
  for (size_t i = 0; i < n; ++i) out.soft_labels.push_back(r.F64s(classes));
  r.ExpectEnd();
  out.Validate();
  return out;
}

Batches BatchRule::For(size_t n) const {
  return SequentialBatches(n, n <= full_batch_limit ? 0 : batch_size);
}

void EncryptionConfig::Validate() const {
  if (pretrain_epochs < 1) throw ConfigError("e_c must be at least 1");
  if (encryptor_epochs < 1) throw ConfigError("e_g must be at least 1");
  if (encryptor_hidden == 0) throw ConfigError("encryptor_hidden must be positive");
  if (batching.batch_size == 0) throw ConfigError("batch size must be positive");
}

double EncryptorCrossEntropy(const EncryptorParams& encryptor,
                             const SegmentedParams& frozen,
                             const StochasticLayer& stochastic,
                             const Dataset& dataset,
                             std::span<const size_t> batch,
                             std::span<double> grad) {
  if (batch.empty()) throw ConfigError("empty batch");
  const size_t d = encryptor.input_dim();
  if (d != frozen.layout.input_dim) {
    throw DimensionError("encryptor width does not match model input");
  }
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != encryptor.net.num_params()) {
    throw DimensionError("encryptor gradient buffer has wrong size");
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  DenseStack::Trace enc_trace;
  ForwardTrace trace;
  std::vector<double> encrypted(d), grad_x(d);
  std::vector<double> grad_probs(frozen.layout.num_classes);
  double total = 0.0;
  for (size_t i : batch) {
    EncryptInto(encryptor, dataset.inputs[i].data(), encrypted, &enc_trace);
    ForwardInto(frozen, &stochastic, encrypted, trace);
    total += CrossEntropy(trace.probs, dataset.labels[i]);
    if (!want_grad) continue;
    CrossEntropyGrad(trace.probs, dataset.labels[i], grad_probs);
    for (double& g : grad_probs) g *= inv;
    BackwardFrom(frozen, &stochastic, trace, grad_probs, nullptr, grad_x);
    // The skip connection passes grad_x straight to x; only the residual
    // branch owns parameters.
    encryptor.net.Backward(enc_trace, grad_x, grad, {});
  }
  return total * inv;
}

std::vector<double> PretrainLocal(SegmentedParams& params,
                                  const Dataset& dataset, int epochs,
                                  OptimizerState& optimizer,
                                  const BatchRule& batching) {
  if (epochs < 1) throw ConfigError("pretraining needs at least one epoch");
  if (dataset.empty()) throw ConfigError("pretraining needs local data");
  const Batches batches = batching.For(dataset.size());
  std::vector<double> epoch_losses;
  for (int e = 0; e < epochs; ++e) {
    double sum = 0.0;
    for (const auto& batch : batches) {
      ModelGrads grads = ModelGrads::ZerosLike(params);
      sum += MeanCrossEntropy(params, nullptr, dataset, batch, &grads);
      OptimizerStep(optimizer, TrainableGroups(params), GradientGroups(grads));
    }
    epoch_losses.push_back(sum / static_cast<double>(batches.size()));
  }
  return epoch_losses;
}

std::vector<double> TrainEncryptor(EncryptorParams& encryptor,
                                   const SegmentedParams& frozen,
                                   const StochasticLayer& stochastic,
                                   const Dataset& dataset, int epochs,
                                   OptimizerState& optimizer,
                                   const BatchRule& batching) {
  if (epochs < 1) throw ConfigError("encryptor training needs at least one epoch");
  if (dataset.empty()) throw ConfigError("encryptor training needs local data");
  const Batches batches = batching.For(dataset.size());
  std::vector<double> epoch_losses;
  std::vector<double> grad(encryptor.net.num_params());
  for (int e = 0; e < epochs; ++e) {
    double sum = 0.0;
    for (const auto& batch : batches) {
      std::fill(grad.begin(), grad.end(), 0.0);
      sum += EncryptorCrossEntropy(encryptor, frozen, stochastic, dataset,
                                   batch, grad);
      OptimizerStep(optimizer, {encryptor.net.values()}, {grad});
    }
    epoch_losses.push_back(sum / static_cast<double>(batches.size()));
  }
  return epoch_losses;
}

EncryptedDataset GenerateEncryptedDataset(const EncryptorParams& encryptor,
                                          const SegmentedParams& frozen,
                                          const StochasticLayer& stochastic,
                                          const Dataset& dataset,
                                          size_t origin_client) {
  EncryptedDataset out;
  out.origin_client = origin_client;
  out.stochastic_seed = stochastic.seed;
  out.inputs.reserve(dataset.size());
  out.soft_labels.reserve(dataset.size());
  ForwardTrace trace;
  for (const Tensor& x : dataset.inputs) {
    Tensor encrypted = Encrypt(encryptor, x);
    ForwardInto(frozen, &stochastic, encrypted.data(), trace);
    CheckFinite(trace.probs, "encrypted soft label");
    out.inputs.push_back(std::move(encrypted));
    out.soft_labels.push_back(trace.probs);
  }
  return out;
}

EncryptedGeneration FedEncryptedDataGenerate(size_t client_id,
                                             SegmentedParams& client,
                                             const SegmentedParams& global,
                                             const Dataset& dataset,
                                             const EncryptionConfig& config) {
  config.Validate();
  if (client.layout != global.layout) {
    throw DimensionError("client and global model layouts differ");
  }
  client.extractor = global.extractor;
  client.classifier = global.classifier;

  EncryptedGeneration result;
  OptimizerState model_opt = TrainableOptimizer(config.pretrain_optimizer, client);
  result.pretrain_losses = PretrainLocal(client, dataset, config.pretrain_epochs,
                                         model_opt, config.batching);

  result.encryptor = EncryptorParams::Create(
      client.layout.input_dim, config.encryptor_hidden, client.layout.activation,
      config.encryptor_seed, config.residual_scale);
  OptimizerState enc_opt = OptimizerState::Create(
      config.encryptor_optimizer, {result.encryptor.net.num_params()});
  result.encryptor_losses =
      TrainEncryptor(result.encryptor, client, client.stochastic, dataset,
                     config.encryptor_epochs, enc_opt, config.batching);

  result.data = GenerateEncryptedDataset(result.encryptor, client,
                                         client.stochastic, dataset, client_id);
  result.pretrained = client;
  client.extractor = global.extractor;
  client.classifier = global.classifier;
  return result;
}

}  // namespace fededs
