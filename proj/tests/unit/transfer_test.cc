#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fededs/encryption.h"
#include "fededs/training.h"
#include "fededs/transfer.h"
#include "test_util.h"

namespace fededs {
namespace {

using testing::KindOf;

const ModelLayout kLayout{4, {6}, 5, 3, Activation::kTanh};

// K clients, each with a pretrained model, encryptor and encrypted set.
struct Federation {
  std::vector<Dataset> data;
  std::vector<StochasticLayer> layers;
  std::vector<SegmentedParams> pretrained;
  std::vector<EncryptedDataset> shared;
  SegmentedParams global;

  TransferContext Context(size_t k, LossWeights w) const {
    TransferContext ctx;
    ctx.client = k;
    ctx.local = &data[k];
    for (size_t i = 0; i < data.size(); ++i) {
      if (i != k) ctx.peers.push_back({i, &shared[i], &layers[i]});
    }
    ctx.weights = w;
    ctx.sampling_seed = 17;
    ctx.shuffle_seed = 23;
    ctx.batch_size = 4;
    return ctx;
  }
};

Federation MakeFederation(size_t K, size_t n = 9) {
  Federation f;
  f.global = SegmentedParams::Create(kLayout, 100, StochasticLayer::Identity(5));
  EncryptionConfig cfg;
  cfg.pretrain_epochs = 2;
  cfg.encryptor_epochs = 2;
  cfg.encryptor_hidden = 6;
  for (size_t k = 0; k < K; ++k) {
    f.data.push_back(testing::RandomDataset(n, 4, 3, 10 + k));
    f.layers.push_back(StochasticLayer::Generate(5, 200 + k, 0.5));
    SegmentedParams client = f.global;
    client.stochastic = f.layers.back();
    cfg.encryptor_seed = 300 + k;
    EncryptedGeneration gen = FedEncryptedDataGenerate(k, client, f.global, f.data[k], cfg);
    f.pretrained.push_back(gen.pretrained);
    f.shared.push_back(std::move(gen.data));
  }
  return f;
}

TEST(Distill, OriginModelReproducesItsOwnLabels) {
  const Federation f = MakeFederation(3);
  for (size_t k = 0; k < 3; ++k) {
    EXPECT_LT(DistillLoss(f.pretrained[k], f.layers[k], f.shared[k]), 1e-6);
  }
}

TEST(Distill, MismatchedLayerIsProtocolError) {
  const Federation f = MakeFederation(2);
  EXPECT_EQ(KindOf([&] { DistillLoss(f.global, f.layers[0], f.shared[1]); }),
            ErrorKind::kProtocol);
}

TEST(Distill, NonNegative) {
  const Federation f = MakeFederation(3);
  for (size_t k = 0; k < 3; ++k) {
    for (size_t i = 0; i < f.shared[k].size(); ++i) {
      EXPECT_GE(DistillLoss(f.global, f.layers[k], f.shared[k], std::vector<size_t>{i}), -1e-9);
    }
  }
}

TEST(Combined, ZeroDistillEqualsLocalCrossEntropy) {
  const Federation f = MakeFederation(3);
  const TransferContext ctx = f.Context(0, {1.0, 0.0});
  EXPECT_EQ(CombinedLossSampled(ctx, f.global),
            MeanCrossEntropy(f.global, nullptr, f.data[0], testing::AllIndices(9), nullptr));
  EXPECT_EQ(CombinedLossFull(ctx, f.global), CombinedLossSampled(ctx, f.global));
}

TEST(Combined, SingletonHandComputed) {
  Federation f = MakeFederation(2, 1);
  const TransferContext ctx = f.Context(0, {0.5, 0.5});
  const SegmentedParams& p = f.global;

  const std::vector<double> plain = ForwardPlain(p, f.data[0].inputs[0]).values();
  const double ce = -std::log(plain[f.data[0].labels[0]] + 1e-12);
  const std::vector<double> pred = ForwardStochastic(p, f.layers[1], f.shared[1].inputs[0]).values();
  const std::vector<double>& target = f.shared[1].soft_labels[0];
  double kl = 0.0;
  for (size_t c = 0; c < 3; ++c) kl += target[c] * std::log((target[c] + 1e-12) / (pred[c] + 1e-12));

  EXPECT_NEAR(CombinedLossSampled(ctx, p), 0.5 * ce + 0.5 * kl, 1e-12);
}

TEST(Combined, SameSeedSamePeer) {
  const Federation f = MakeFederation(4);
  const TransferContext ctx = f.Context(1, {0.5, 0.5});
  EXPECT_EQ(SampledPeerIndex(ctx), SampledPeerIndex(ctx));
  EXPECT_EQ(CombinedLossSampled(ctx, f.global), CombinedLossSampled(ctx, f.global));
}

TEST(Combined, TwoClientsFullEqualsSampled) {
  const Federation f = MakeFederation(2);
  for (uint64_t seed = 0; seed < 10; ++seed) {
    TransferContext ctx = f.Context(0, {0.7, 0.3});
    ctx.sampling_seed = seed;
    EXPECT_EQ(CombinedLossFull(ctx, f.global), CombinedLossSampled(ctx, f.global));
  }
}

TEST(Combined, EnumeratedSampledTermIsFullOverKMinusOne) {
  const size_t K = 5;
  const Federation f = MakeFederation(K);
  const LossWeights w{0.5, 0.5};
  const TransferContext ctx = f.Context(2, w);
  const double local = w.local * MeanCrossEntropy(f.global, nullptr, f.data[2],
                                                  testing::AllIndices(9), nullptr);
  double mean_sampled = 0.0;
  for (const PeerShare& peer : ctx.peers) {
    TransferContext single = ctx;
    single.peers = {peer};
    mean_sampled += CombinedLossSampled(single, f.global) - local;
  }
  mean_sampled /= static_cast<double>(K - 1);
  const double full_term = CombinedLossFull(ctx, f.global) - local;
  EXPECT_NEAR(mean_sampled, full_term / static_cast<double>(K - 1), 1e-12);
}

TEST(Combined, NoPeersIsConfigError) {
  const Federation f = MakeFederation(2);
  TransferContext ctx = f.Context(0, {0.5, 0.5});
  ctx.peers.clear();
  EXPECT_EQ(KindOf([&] { CombinedLossSampled(ctx, f.global); }), ErrorKind::kConfig);
}

TEST(Sampling, UniformOverPeers) {
  const size_t K = 6;
  const Federation f = MakeFederation(K, 3);
  TransferContext ctx = f.Context(0, {0.5, 0.5});
  std::vector<int> counts(K - 1, 0);
  const int draws = 5000;
  for (int d = 0; d < draws; ++d) {
    ctx.sampling_seed = DeriveSeed(1, "peer", 0, static_cast<uint64_t>(d));
    ++counts[SampledPeerIndex(ctx)];
  }
  const double p = 1.0 / (K - 1);
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_LE(std::abs(c - draws * p), 3 * sigma) << c;
}

TEST(FedProx, ClosedForms) {
  const SegmentedParams g = SegmentedParams::Zeros(kLayout, StochasticLayer::Identity(5));
  EXPECT_EQ(FedProxPenalty(g, g, 0.1), 0.0);
  SegmentedParams p = g;
  p.classifier.values()[0] = 2.0;
  EXPECT_NEAR(FedProxPenalty(p, g, 0.1), 0.2, 1e-15);
  EXPECT_EQ(FedProxPenalty(p, g, 0.0), 0.0);
  p.stochastic = StochasticLayer::Generate(5, 1, 0.5);
  EXPECT_NEAR(FedProxPenalty(p, g, 0.1), 0.2, 1e-15);
}

TEST(FedProx, ShapeMismatchIsDimensionError) {
  const SegmentedParams a = SegmentedParams::Zeros(kLayout, StochasticLayer::Identity(5));
  const SegmentedParams b =
      SegmentedParams::Zeros({4, {7}, 5, 3, Activation::kTanh}, StochasticLayer::Identity(5));
  EXPECT_EQ(KindOf([&] { FedProxPenalty(a, b, 0.1); }), ErrorKind::kDimension);
}

TEST(FedProx, ProximalStepsContractGeometrically) {
  const SegmentedParams g = SegmentedParams::Create(kLayout, 1, StochasticLayer::Identity(5));
  SegmentedParams p = SegmentedParams::Create(kLayout, 2, StochasticLayer::Identity(5));
  const double lr = 0.1, mu = 0.5;
  OptimizerState opt = TrainableOptimizer({OptimizerKind::kMomentumSgd, lr, 0.0, 0.0}, p);
  const double d0 = FedProxPenalty(p, g, 1.0);
  for (int s = 1; s <= 5; ++s) {
    ModelGrads grads = ModelGrads::ZerosLike(p);
    FedProxPenalty(p, g, mu, &grads);
    OptimizerStep(opt, TrainableGroups(p), GradientGroups(grads));
    EXPECT_NEAR(FedProxPenalty(p, g, 1.0), d0 * std::pow(1.0 - lr * mu, 2 * s), 1e-12);
  }
}

TEST(KnowTrans, ZeroDistillZeroMuIsPlainLocalTrainingBitwise) {
  const Federation f = MakeFederation(3);
  TransferContext ctx = f.Context(1, {1.0, 0.0});
  ctx.epochs = 3;
  const OptimizerConfig opt{OptimizerKind::kMomentumSgd, 0.01, 0.9, 1e-4};
  SegmentedParams client = f.global;
  client.stochastic = f.layers[1];
  const TransferResult r = FedKnowTrans(ctx, client, f.global, opt);

  SegmentedParams ref = client;
  OptimizerState state = TrainableOptimizer(opt, ref);
  for (uint64_t e = 0; e < 3; ++e) {
    for (const auto& batch :
         ShuffledBatches(9, 4, DeriveSeed(ctx.shuffle_seed, "local", e))) {
      ModelGrads grads = ModelGrads::ZerosLike(ref);
      MeanCrossEntropy(ref, nullptr, f.data[1], batch, &grads);
      OptimizerStep(state, TrainableGroups(ref), GradientGroups(grads));
    }
  }
  EXPECT_EQ(r.params, ref);
  EXPECT_EQ(r.epochs, 3);
  EXPECT_EQ(r.steps, 9u);  // 3 epochs x 3 batches
  EXPECT_EQ(r.params.stochastic, f.layers[1]);
}

TEST(KnowTrans, RecordsScheduleAndPeer) {
  const Federation f = MakeFederation(3);
  TransferContext ctx = f.Context(0, {0.5, 0.5});
  ctx.epochs = 2;
  SegmentedParams client = f.global;
  client.stochastic = f.layers[0];
  const TransferResult r =
      FedKnowTrans(ctx, client, f.global, {OptimizerKind::kMomentumSgd, 0.01, 0.9, 1e-4});
  EXPECT_EQ(r.epochs, 2);
  EXPECT_EQ(r.weights.distill, 0.5);
  ASSERT_TRUE(r.sampled_peer.has_value());
  EXPECT_EQ(*r.sampled_peer, ctx.peers[SampledPeerIndex(ctx)].client);
  EXPECT_EQ(r.epoch_losses.size(), 2u);
  EXPECT_NE(r.params.extractor, f.global.extractor);
}

TEST(KnowTrans, ContextValidation) {
  const Federation f = MakeFederation(2);
  TransferContext ctx = f.Context(0, {0.6, 0.6});
  SegmentedParams client = f.global;
  EXPECT_EQ(KindOf([&] { FedKnowTrans(ctx, client, f.global, {}); }), ErrorKind::kConfig);
  ctx = f.Context(0, {0.5, 0.5});
  ctx.epochs = 0;
  EXPECT_EQ(KindOf([&] { FedKnowTrans(ctx, client, f.global, {}); }), ErrorKind::kConfig);
  ctx = f.Context(0, {0.5, 0.5});
  ctx.peers.push_back({0, &f.shared[0], &f.layers[0]});
  EXPECT_EQ(KindOf([&] { FedKnowTrans(ctx, client, f.global, {}); }), ErrorKind::kConfig);
}

}  // namespace
}  // namespace fededs
