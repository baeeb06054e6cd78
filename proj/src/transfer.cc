#include "fededs/transfer.h"

#include <numeric>
#include <random>

#include "fededs/errors.h"
#include "fededs/rng.h"
#include "fededs/training.h"

namespace fededs {

void TransferContext::Validate() const {
  if (local == nullptr || local->empty()) {
    throw ConfigError("client " + std::to_string(client) + " has no local data");
  }
  if (weights.local + weights.distill != 1.0) {
    throw ConfigError("loss weights must sum to one");
  }
  if (epochs < 1) throw ConfigError("local epochs must be at least 1");
  if (mu < 0.0) throw ConfigError("mu must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  for (const PeerShare& p : peers) {
    if (p.client == client) throw ConfigError("peer set must exclude the client");
    if (p.data == nullptr || p.layer == nullptr) {
      throw ConfigError("peer share is incomplete");
    }
  }
}

double DistillLoss(const SegmentedParams& params,
                   const StochasticLayer& peer_layer,
                   const EncryptedDataset& data, std::span<const size_t> batch,
                   ModelGrads* grads) {
  if (data.stochastic_seed != peer_layer.seed) {
    throw ProtocolError("encrypted dataset from client " +
                        std::to_string(data.origin_client) +
                        " was labelled with stochastic seed " +
                        std::to_string(data.stochastic_seed) +
                        ", not the substituted layer's seed " +
                        std::to_string(peer_layer.seed));
  }
  if (batch.empty()) throw ConfigError("empty distillation batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  ForwardTrace trace;
  std::vector<double> grad_probs(params.layout.num_classes);
  double total = 0.0;
  for (size_t i : batch) {
    ForwardInto(params, &peer_layer, data.inputs[i].data(), trace);
    total += KlDivergence(data.soft_labels[i], trace.probs);
    if (grads) {
      KlDivergenceGrad(data.soft_labels[i], trace.probs, grad_probs);
      for (double& g : grad_probs) g *= inv;
      BackwardFrom(params, &peer_layer, trace, grad_probs, grads, {});
    }
  }
  return total * inv;
}

double DistillLoss(const SegmentedParams& params,
                   const StochasticLayer& peer_layer,
                   const EncryptedDataset& data) {
  std::vector<size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return DistillLoss(params, peer_layer, data, all);
}

size_t SampledPeerIndex(const TransferContext& ctx) {
  if (ctx.peers.empty()) throw ConfigError("no peers to sample from");
  Rng rng(ctx.sampling_seed);
  std::uniform_int_distribution<size_t> pick(0, ctx.peers.size() - 1);
  return pick(rng);
}

namespace {

std::vector<size_t> AllIndices(size_t n) {
  std::vector<size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  return all;
}

double LocalTerm(const TransferContext& ctx, const SegmentedParams& params,
                 std::span<const size_t> batch, ModelGrads* grads) {
  const double ce = MeanCrossEntropy(params, nullptr, *ctx.local, batch, grads);
  if (grads && ctx.weights.local != 1.0) grads->Scale(ctx.weights.local);
  return ctx.weights.local * ce;
}

double PeerTerm(const TransferContext& ctx, const SegmentedParams& params,
                const PeerShare& peer, std::span<const size_t> batch,
                ModelGrads* grads) {
  if (!grads) {
    return ctx.weights.distill * DistillLoss(params, *peer.layer, *peer.data, batch);
  }
  ModelGrads peer_grads = ModelGrads::ZerosLike(params);
  const double kl = DistillLoss(params, *peer.layer, *peer.data, batch, &peer_grads);
  grads->AddScaled(peer_grads, ctx.weights.distill);
  return ctx.weights.distill * kl;
}

}  // namespace

double CombinedLossSampled(const TransferContext& ctx,
                           const SegmentedParams& params, ModelGrads* grads) {
  ctx.Validate();
  if (ctx.peers.empty()) throw ConfigError("combined loss needs at least one peer");
  double loss = LocalTerm(ctx, params, AllIndices(ctx.local->size()), grads);
  if (ctx.weights.distill == 0.0) return loss;
  const PeerShare& peer = ctx.peers[SampledPeerIndex(ctx)];
  return loss + PeerTerm(ctx, params, peer, AllIndices(peer.data->size()), grads);
}

double CombinedLossFull(const TransferContext& ctx,
                        const SegmentedParams& params, ModelGrads* grads) {
  ctx.Validate();
  if (ctx.peers.empty()) throw ConfigError("combined loss needs at least one peer");
  double loss = LocalTerm(ctx, params, AllIndices(ctx.local->size()), grads);
  if (ctx.weights.distill == 0.0) return loss;
  for (const PeerShare& peer : ctx.peers) {
    loss += PeerTerm(ctx, params, peer, AllIndices(peer.data->size()), grads);
  }
  return loss;
}

double FedProxPenalty(const SegmentedParams& params,
                      const SegmentedParams& global, double mu,
                      ModelGrads* grads) {
  if (mu < 0.0) throw ConfigError("mu must be non-negative");
  const auto& pe = params.extractor.values();
  const auto& pc = params.classifier.values();
  const auto& ge = global.extractor.values();
  const auto& gc = global.classifier.values();
  if (pe.size() != ge.size() || pc.size() != gc.size()) {
    throw DimensionError("proximal term: local and global segments differ in shape");
  }
  if (mu == 0.0) return 0.0;
  double sq = 0.0;
  for (size_t i = 0; i < pe.size(); ++i) {
    const double d = pe[i] - ge[i];
    sq += d * d;
    if (grads) grads->extractor[i] += mu * d;
  }
  for (size_t i = 0; i < pc.size(); ++i) {
    const double d = pc[i] - gc[i];
    sq += d * d;
    if (grads) grads->classifier[i] += mu * d;
  }
  return 0.5 * mu * sq;
}

TransferResult FedKnowTrans(const TransferContext& ctx,
                            const SegmentedParams& client,
                            const SegmentedParams& global,
                            const OptimizerConfig& optimizer) {
  ctx.Validate();
  if (client.layout != global.layout) {
    throw DimensionError("client and global model layouts differ");
  }
  TransferResult result;
  result.params = client;
  result.params.extractor = global.extractor;
  result.params.classifier = global.classifier;
  result.epochs = ctx.epochs;
  result.weights = ctx.weights;

  const bool distill = ctx.weights.distill != 0.0;
  const PeerShare* peer = nullptr;
  if (!ctx.peers.empty()) {
    const size_t index = SampledPeerIndex(ctx);
    peer = &ctx.peers[index];
    result.sampled_peer = peer->client;
  }
  if (distill && peer == nullptr) {
    throw ConfigError("distillation weight is positive but client " +
                      std::to_string(ctx.client) + " has no peers");
  }

  SegmentedParams& local = result.params;
  OptimizerState state = TrainableOptimizer(optimizer, local);
  for (int64_t e = 0; e < ctx.epochs; ++e) {
    const uint64_t epoch = static_cast<uint64_t>(e);
    const Batches local_batches = ShuffledBatches(
        ctx.local->size(), ctx.batch_size, DeriveSeed(ctx.shuffle_seed, "local", epoch));
    Batches peer_batches;
    if (distill) {
      peer_batches = ShuffledBatches(peer->data->size(), ctx.batch_size,
                                     DeriveSeed(ctx.shuffle_seed, "peer", epoch));
    }
    double epoch_loss = 0.0;
    for (size_t j = 0; j < local_batches.size(); ++j) {
      ModelGrads grads = ModelGrads::ZerosLike(local);
      double loss = LocalTerm(ctx, local, local_batches[j], &grads);
      if (distill) {
        loss += PeerTerm(ctx, local, *peer, peer_batches[j % peer_batches.size()], &grads);
      }
      if (ctx.mu > 0.0) loss += FedProxPenalty(local, global, ctx.mu, &grads);
      CheckFinite(loss, "combined local loss of client " + std::to_string(ctx.client));
      OptimizerStep(state, TrainableGroups(local), GradientGroups(grads));
      epoch_loss += loss;
      ++result.steps;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(local_batches.size()));
  }
  return result;
}

}  // namespace fededs
