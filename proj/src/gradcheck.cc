#include "fededs/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fededs/encryption.h"
#include "fededs/errors.h"
#include "fededs/rng.h"
#include "fededs/training.h"
#include "fededs/transfer.h"

namespace fededs {

GradCheckResult CheckGradient(const std::string& name, std::span<double> params,
                              std::span<const double> analytic,
                              const std::function<double()>& loss, double step,
                              double tolerance) {
  if (params.size() != analytic.size()) {
    throw DimensionError("gradient check: analytic gradient has wrong size");
  }
  GradCheckResult r;
  r.name = name;
  r.num_params = params.size();
  for (size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss();
    params[i] = saved - step;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i];
    if (std::abs(a) < kGradCheckFloor && std::abs(numeric) < kGradCheckFloor) continue;
    ++r.checked;
    const double rel = std::abs(a - numeric) / std::max(std::abs(a), std::abs(numeric));
    r.max_relative_error = std::max(r.max_relative_error, rel);
  }
  r.passed = r.max_relative_error < tolerance;
  return r;
}

namespace {

std::vector<double> Concat(const ModelGrads& g) {
  std::vector<double> out = g.extractor;
  out.insert(out.end(), g.classifier.begin(), g.classifier.end());
  return out;
}

// Checks a loss over the trainable segments of `params` by finite
// differences on a flat copy.
GradCheckResult CheckModelLoss(const std::string& name, SegmentedParams& params,
                               const std::function<double(const SegmentedParams&,
                                                          ModelGrads*)>& loss) {
  ModelGrads grads = ModelGrads::ZerosLike(params);
  loss(params, &grads);
  const std::vector<double> analytic = Concat(grads);
  std::vector<double> flat = params.extractor.values();
  flat.insert(flat.end(), params.classifier.values().begin(),
              params.classifier.values().end());
  const size_t ne = params.extractor.num_params();
  auto eval = [&] {
    std::copy(flat.begin(), flat.begin() + ne, params.extractor.values().begin());
    std::copy(flat.begin() + ne, flat.end(), params.classifier.values().begin());
    return loss(params, nullptr);
  };
  GradCheckResult r = CheckGradient(name, flat, analytic, eval);
  eval();
  return r;
}

}  // namespace

std::vector<GradCheckResult> RunGradientChecks(uint64_t seed) {
  const ModelLayout layout{3, {4}, 3, 3, Activation::kTanh};
  const size_t K = 3;
  std::vector<StochasticLayer> layers;
  for (size_t k = 0; k < K; ++k) {
    layers.push_back(StochasticLayer::Generate(layout.feature_dim,
                                               DeriveSeed(seed, "gc-stoch", k), 0.5));
  }
  SegmentedParams model =
      SegmentedParams::Create(layout, DeriveSeed(seed, "gc-model"), layers[0]);
  SegmentedParams global =
      SegmentedParams::Create(layout, DeriveSeed(seed, "gc-global"), layers[0]);

  Dataset local;
  local.num_classes = layout.num_classes;
  Rng rng(DeriveSeed(seed, "gc-data"));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (size_t i = 0; i < 5; ++i) {
    std::vector<double> x(layout.input_dim);
    for (double& v : x) v = normal(rng);
    local.inputs.push_back(Tensor::FromVector(std::move(x)));
    local.labels.push_back(i % layout.num_classes);
  }

  // Peers' encrypted datasets come from their own (random) models and
  // encryptors, so the soft labels are not trivially matched.
  std::vector<EncryptedDataset> shared(K);
  for (size_t k = 1; k < K; ++k) {
    SegmentedParams peer = SegmentedParams::Create(layout, DeriveSeed(seed, "gc-peer", k), layers[k]);
    EncryptorParams enc = EncryptorParams::Create(layout.input_dim, 4, Activation::kTanh,
                                                  DeriveSeed(seed, "gc-enc", k), 0.5);
    shared[k] = GenerateEncryptedDataset(enc, peer, layers[k], local, k);
  }

  TransferContext ctx;
  ctx.client = 0;
  ctx.local = &local;
  for (size_t k = 1; k < K; ++k) ctx.peers.push_back({k, &shared[k], &layers[k]});
  ctx.weights = {0.5, 0.5};
  ctx.mu = 0.1;
  ctx.sampling_seed = DeriveSeed(seed, "gc-sample");

  std::vector<GradCheckResult> results;
  std::vector<size_t> all(local.size());
  std::iota(all.begin(), all.end(), 0);

  results.push_back(CheckModelLoss("plain cross-entropy", model,
                                   [&](const SegmentedParams& p, ModelGrads* g) {
                                     return MeanCrossEntropy(p, nullptr, local, all, g);
                                   }));

  {
    EncryptorParams enc = EncryptorParams::Create(layout.input_dim, 4, Activation::kTanh,
                                                  DeriveSeed(seed, "gc-own-enc"), 0.5);
    std::vector<double> grad(enc.net.num_params(), 0.0);
    EncryptorCrossEntropy(enc, model, layers[0], local, all, grad);
    std::vector<double> flat = enc.net.values();
    auto eval = [&] {
      enc.net.values() = flat;
      return EncryptorCrossEntropy(enc, model, layers[0], local, all, {});
    };
    results.push_back(CheckGradient("encryptor cross-entropy (stochastic path)", flat,
                                    grad, eval));
  }

  results.push_back(CheckModelLoss("KL distillation", model,
                                   [&](const SegmentedParams& p, ModelGrads* g) {
                                     return DistillLoss(p, layers[1], shared[1], all, g);
                                   }));

  results.push_back(CheckModelLoss("combined sampled loss", model,
                                   [&](const SegmentedParams& p, ModelGrads* g) {
                                     return CombinedLossSampled(ctx, p, g);
                                   }));

  results.push_back(CheckModelLoss("combined loss with proximal term", model,
                                   [&](const SegmentedParams& p, ModelGrads* g) {
                                     return CombinedLossSampled(ctx, p, g) +
                                            FedProxPenalty(p, global, ctx.mu, g);
                                   }));
  return results;
}

}  // namespace fededs
