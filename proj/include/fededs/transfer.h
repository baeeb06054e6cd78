#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fededs/data.h"
#include "fededs/encryption.h"
#include "fededs/nn.h"
#include "fededs/optimizer.h"
#include "fededs/schedules.h"

namespace fededs {

// Read-only view of one peer's shared material.
struct PeerShare {
  size_t client = 0;
  const EncryptedDataset* data = nullptr;
  const StochasticLayer* layer = nullptr;
};

// Everything client k needs for one round of local training.
struct TransferContext {
  size_t client = 0;
  const Dataset* local = nullptr;
  std::vector<PeerShare> peers;  // never contains `client`
  int64_t round = 1;
  LossWeights weights;
  int64_t epochs = 1;
  double mu = 0.0;
  uint64_t sampling_seed = 0;  // fixes the sampled peer for the round
  uint64_t shuffle_seed = 0;   // fixes minibatch order
  size_t batch_size = 32;

  void Validate() const;
};

// Mean KL divergence between the stored soft labels and the model's
// predictions with `peer_layer` substituted for the stochastic segment.
double DistillLoss(const SegmentedParams& params,
                   const StochasticLayer& peer_layer,
                   const EncryptedDataset& data, std::span<const size_t> batch,
                   ModelGrads* grads = nullptr);
double DistillLoss(const SegmentedParams& params,
                   const StochasticLayer& peer_layer,
                   const EncryptedDataset& data);

// Index into ctx.peers of the peer sampled uniformly for this round.
size_t SampledPeerIndex(const TransferContext& ctx);

// lambda_c * local CE + lambda_dis * distillation on the sampled peer. The
// peer term is skipped entirely when lambda_dis is zero.
double CombinedLossSampled(const TransferContext& ctx,
                           const SegmentedParams& params,
                           ModelGrads* grads = nullptr);
// Same with the distillation term summed over every peer (no 1/(K-1)).
double CombinedLossFull(const TransferContext& ctx,
                        const SegmentedParams& params,
                        ModelGrads* grads = nullptr);

// (mu / 2) * (|g - g_G|^2 + |c - c_G|^2); the stochastic segment is
// excluded.
double FedProxPenalty(const SegmentedParams& params,
                      const SegmentedParams& global, double mu,
                      ModelGrads* grads = nullptr);

struct TransferResult {
  SegmentedParams params;
  int64_t epochs = 0;
  LossWeights weights;
  std::optional<size_t> sampled_peer;  // client id
  std::vector<double> epoch_losses;
  size_t steps = 0;
};

// One round of local training from the incoming global segments: E_t
// epochs of minibatch descent on the sampled combined loss, plus the
// proximal term when mu > 0. Each local minibatch is paired with the next
// minibatch of the sampled peer's encrypted data.
TransferResult FedKnowTrans(const TransferContext& ctx,
                            const SegmentedParams& client,
                            const SegmentedParams& global,
                            const OptimizerConfig& optimizer);

}  // namespace fededs
