#include "fededs/orchestrator.h"

#include <atomic>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>
#include <tuple>

#include "fededs/codec.h"
#include "fededs/errors.h"
#include "fededs/rng.h"
#include "fededs/training.h"
#include "fededs/transfer.h"

namespace fededs {

namespace {

// Runs fn(k) for every client, optionally on a worker pool. Results must be
// written to per-client slots so the outcome is independent of scheduling.
template <typename Fn>
void ForEachClient(size_t num_clients, size_t threads, int64_t round, Fn&& fn) {
  std::vector<std::exception_ptr> errors(num_clients);
  auto run = [&](size_t k) {
    try {
      fn(k);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (threads <= 1) {
    for (size_t k = 0; k < num_clients; ++k) run(k);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::jthread> pool;
    for (size_t w = 0; w < std::min(threads, num_clients); ++w) {
      pool.emplace_back([&] {
        for (size_t k = next++; k < num_clients; k = next++) run(k);
      });
    }
  }
  for (size_t k = 0; k < num_clients; ++k) {
    if (!errors[k]) continue;
    const std::string where = (round == 0 ? std::string("setup") :
                               "round " + std::to_string(round)) +
                              ", client " + std::to_string(k) + ": ";
    try {
      std::rethrow_exception(errors[k]);
    } catch (const Error& e) {
      throw Error(e.kind(), where + e.what());
    }
  }
}

uint64_t Bytes(const std::vector<uint8_t>& record) { return record.size(); }

uint64_t StochasticLayerBytes(const StochasticLayer& layer) {
  ByteWriter w(RecordType::kStochasticLayer);
  w.Count(layer.feature_dim);
  w.U64(layer.seed);
  w.F64(layer.scale);
  w.F64s(layer.weight);
  w.F64s(layer.offset);
  return w.bytes().size();
}

SimulationResult RunProtocol(const SimConfig& config, bool fednova) {
  config.Validate();
  const size_t K = config.num_clients;
  const FederationData data = PrepareFederation(config);
  const ModelLayout layout = config.Layout(data.train.input_dim());

  SimulationResult result;
  result.global = SegmentedParams::Create(layout, DeriveSeed(config.base_seed, "init"),
                                          StochasticLayer::Identity(layout.feature_dim));

  std::vector<SegmentedParams> clients;
  clients.reserve(K);
  for (size_t k = 0; k < K; ++k) {
    StochasticLayer layer =
        config.with_eds ? StochasticLayer::Generate(layout.feature_dim,
                                                    StochasticSeed(config.base_seed, k),
                                                    config.stochastic_scale)
                        : StochasticLayer::Identity(layout.feature_dim);
    SegmentedParams client = result.global;
    client.stochastic = layer;
    result.stochastic_layers.push_back(std::move(layer));
    clients.push_back(std::move(client));
  }

  // Setup: initial distribution from the server.
  const uint64_t params_bytes = Bytes(SerializeTrainable(TrainableParams::From(result.global)));
  for (size_t k = 0; k < K; ++k) {
    result.log.push_back({0, Tier::kServer, MessageKind::kGlobalParams, K, k, params_bytes});
    if (config.with_eds) {
      result.log.push_back({0, Tier::kServer, MessageKind::kStochasticLayer, K, k,
                            StochasticLayerBytes(result.stochastic_layers[k])});
    }
  }

  if (config.with_eds) {
    result.encrypted.resize(K);
    ForEachClient(K, config.threads, 0, [&](size_t k) {
      EncryptedGeneration gen = FedEncryptedDataGenerate(
          k, clients[k], result.global, data.clients[k], config.Encryption(k));
      result.encrypted[k] = std::move(gen.data);
    });
    for (size_t k = 0; k < K; ++k) {
      const uint64_t data_bytes = Bytes(SerializeEncryptedDataset(result.encrypted[k]));
      const uint64_t layer_bytes = StochasticLayerBytes(result.stochastic_layers[k]);
      for (size_t i = 0; i < K; ++i) {
        if (i == k) continue;
        result.log.push_back({0, Tier::kPeer, MessageKind::kEncryptedDataset, k, i, data_bytes});
        result.log.push_back({0, Tier::kPeer, MessageKind::kStochasticLayer, k, i, layer_bytes});
      }
    }
  }

  std::vector<size_t> counts;
  for (const Dataset& d : data.clients) counts.push_back(d.size());
  const std::vector<double> weights = config.aggregate_weighting == AggregateWeighting::kPk
                                          ? WeightsPk(counts)
                                          : UniformWeights(K);
  const double mu = config.method == Method::kFedProx ? config.mu : 0.0;

  for (int64_t t = 1; t <= config.rounds; ++t) {
    RoundMetrics m;
    m.round = t;
    if (config.with_eds) {
      m.epochs = EpochsAt(config.epoch_schedule, t);
      m.weights = config.force_lambda_dis_zero ? LossWeights{1.0, 0.0}
                                               : LambdasAt(config.lambda_schedule, t);
    } else {
      m.epochs = config.local_epochs;
      m.weights = {1.0, 0.0};
    }

    std::vector<TransferResult> updates(K);
    ForEachClient(K, config.threads, t, [&](size_t k) {
      TransferContext ctx;
      ctx.client = k;
      ctx.local = &data.clients[k];
      if (config.with_eds) {
        for (size_t i = 0; i < K; ++i) {
          if (i == k) continue;
          ctx.peers.push_back({i, &result.encrypted[i], &result.stochastic_layers[i]});
        }
      }
      ctx.round = t;
      ctx.weights = m.weights;
      ctx.epochs = m.epochs;
      ctx.mu = mu;
      ctx.sampling_seed = DeriveSeed(config.base_seed, "peer", k, static_cast<uint64_t>(t));
      ctx.shuffle_seed = DeriveSeed(config.base_seed, "shuffle", k, static_cast<uint64_t>(t));
      ctx.batch_size = config.batch_size;
      updates[k] = FedKnowTrans(ctx, clients[k], result.global, config.LocalOptimizer());
    });

    const TrainableParams incoming = TrainableParams::From(result.global);
    std::vector<TrainableParams> uploads;
    uploads.reserve(K);
    double loss_sum = 0.0;
    for (size_t k = 0; k < K; ++k) {
      const TransferResult& u = updates[k];
      loss_sum += u.epoch_losses.back();
      m.sampled_peers.push_back(u.sampled_peer);
      m.local_steps.push_back(u.steps);
      TrainableParams updated = TrainableParams::From(u.params);
      if (fednova) {
        const double norm = FedNovaNorm(u.steps, config.rho);
        m.fednova_norms.push_back(norm);
        uploads.push_back(FedNovaDelta(updated, incoming, config.learning_rate, norm));
      } else {
        uploads.push_back(std::move(updated));
      }
    }
    m.mean_loss = loss_sum / static_cast<double>(K);

    TrainableParams next =
        fednova ? FedNovaAggregate(incoming, uploads, m.fednova_norms, config.learning_rate,
                                   config.fednova_omit_eta)
                : FedAvgAggregate(uploads, weights);
    CheckFinite(next.extractor, "aggregated extractor in round " + std::to_string(t));
    CheckFinite(next.classifier, "aggregated classifier in round " + std::to_string(t));
    next.AssignTo(result.global);

    const uint64_t up_bytes = Bytes(SerializeTrainable(uploads.front()));
    const uint64_t down_bytes = Bytes(SerializeTrainable(next));
    for (size_t k = 0; k < K; ++k) {
      result.log.push_back({t, Tier::kServer,
                            fednova ? MessageKind::kClientDelta : MessageKind::kClientParams,
                            k, K, up_bytes + (fednova ? sizeof(double) : 0)});
      result.log.push_back({t, Tier::kServer, MessageKind::kGlobalParams, K, k, down_bytes});
    }
    const CommCost cost = SimulateCommCost(config.network, result.log, t);
    m.cum_seconds = cost.total_seconds();
    m.cum_server_bytes = cost.server_bytes;
    m.cum_peer_bytes = cost.peer_bytes;
    m.accuracy = EvaluateTop1(result.global, data.holdout);
    result.metrics.push_back(std::move(m));
  }
  return result;
}

}  // namespace

uint64_t StochasticSeed(uint64_t base_seed, size_t client) {
  return DeriveSeed(base_seed, "stoch", client);
}

FederationData PrepareFederation(const SimConfig& config) {
  Dataset all = config.images_path.empty()
                    ? GenerateSynthetic(config.Synthetic())
                    : LoadIdxDataset(config.images_path, config.labels_path);
  if (all.num_classes != config.num_classes) {
    throw ConfigError("dataset has " + std::to_string(all.num_classes) +
                      " classes but num_classes is " + std::to_string(config.num_classes));
  }
  FederationData out;
  std::tie(out.train, out.holdout) =
      SplitHoldout(all, config.holdout_fraction, config.data_seed);
  out.partition = DirichletPartition(out.train, config.alpha, config.num_clients,
                                     config.partition_seed);
  for (const auto& indices : out.partition.assignments) {
    out.clients.push_back(out.train.Subset(indices));
  }
  return out;
}

SimulationResult RunFedEds(const SimConfig& config) {
  if (config.method == Method::kFedNova) {
    throw ConfigError("RunFedEds handles fedavg and fedprox; use RunFedNovaEds");
  }
  return RunProtocol(config, false);
}

SimulationResult RunFedNovaEds(const SimConfig& config) {
  if (config.method != Method::kFedNova) {
    throw ConfigError("RunFedNovaEds requires method=fednova");
  }
  return RunProtocol(config, true);
}

SimulationResult RunSimulation(const SimConfig& config) {
  return config.method == Method::kFedNova ? RunFedNovaEds(config) : RunFedEds(config);
}

double EvaluateTop1(const SegmentedParams& params, const Dataset& holdout) {
  if (holdout.empty()) throw ConfigError("holdout set is empty");
  return Accuracy(params, nullptr, holdout);
}

std::optional<int64_t> RoundsToTarget(std::span<const RoundMetrics> metrics,
                                      double target) {
  if (metrics.empty()) throw ConfigError("no metrics");
  for (const RoundMetrics& m : metrics) {
    if (m.accuracy >= target) return m.round;
  }
  return std::nullopt;
}

double CentralizedAccuracy(const SimConfig& config, int epochs) {
  if (epochs < 1) throw ConfigError("centralized training needs at least one epoch");
  const FederationData data = PrepareFederation(config);
  const ModelLayout layout = config.Layout(data.train.input_dim());
  SegmentedParams model = SegmentedParams::Create(
      layout, DeriveSeed(config.base_seed, "init"),
      StochasticLayer::Identity(layout.feature_dim));
  OptimizerState state = TrainableOptimizer(config.LocalOptimizer(), model);
  for (int e = 0; e < epochs; ++e) {
    const Batches batches = ShuffledBatches(
        data.train.size(), config.batch_size,
        DeriveSeed(config.base_seed, "central", static_cast<uint64_t>(e)));
    for (const auto& batch : batches) {
      ModelGrads grads = ModelGrads::ZerosLike(model);
      MeanCrossEntropy(model, nullptr, data.train, batch, &grads);
      OptimizerStep(state, TrainableGroups(model), GradientGroups(grads));
    }
  }
  return EvaluateTop1(model, data.holdout);
}

std::string MetricsToCsv(std::span<const RoundMetrics> metrics) {
  std::string out(kMetricsHeader);
  out += '\n';
  char line[512];
  for (const RoundMetrics& m : metrics) {
    std::snprintf(line, sizeof(line), "%lld,%.9g,%.9g,%lld,%.9g,%.9g,%.9g,%llu,%llu\n",
                  static_cast<long long>(m.round), m.accuracy, m.mean_loss,
                  static_cast<long long>(m.epochs), m.weights.local, m.weights.distill,
                  m.cum_seconds, static_cast<unsigned long long>(m.cum_server_bytes),
                  static_cast<unsigned long long>(m.cum_peer_bytes));
    out += line;
  }
  return out;
}

std::vector<RoundMetrics> ParseMetricsCsv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw FormatError("metrics file does not start with the expected header");
  }
  std::vector<RoundMetrics> out;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    RoundMetrics m;
    long long round = 0, epochs = 0;
    unsigned long long server = 0, peer = 0;
    const int got = std::sscanf(line.c_str(), "%lld,%lf,%lf,%lld,%lf,%lf,%lf,%llu,%llu",
                                &round, &m.accuracy, &m.mean_loss, &epochs,
                                &m.weights.local, &m.weights.distill, &m.cum_seconds,
                                &server, &peer);
    if (got != 9) {
      throw FormatError("metrics line " + std::to_string(line_no) + " is malformed");
    }
    m.round = round;
    m.epochs = epochs;
    m.cum_server_bytes = server;
    m.cum_peer_bytes = peer;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace fededs
