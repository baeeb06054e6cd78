#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fededs/aggregation.h"
#include "fededs/config.h"
#include "fededs/data.h"
#include "fededs/encryption.h"
#include "fededs/network_cost.h"
#include "fededs/nn.h"
#include "fededs/schedules.h"

namespace fededs {

struct RoundMetrics {
  int64_t round = 0;
  double accuracy = 0.0;
  double mean_loss = 0.0;
  int64_t epochs = 0;
  LossWeights weights;
  double cum_seconds = 0.0;
  uint64_t cum_server_bytes = 0;
  uint64_t cum_peer_bytes = 0;
  // Per client; empty entries when no peer was sampled.
  std::vector<std::optional<size_t>> sampled_peers;
  // Per client |a_k|_1, filled by FedNova runs only.
  std::vector<double> fednova_norms;
  std::vector<size_t> local_steps;
};

struct FederationData {
  Dataset train;
  Dataset holdout;
  PartitionSpec partition;
  std::vector<Dataset> clients;
};

struct SimulationResult {
  std::vector<RoundMetrics> metrics;
  SegmentedParams global;  // carries an identity stochastic layer
  std::vector<MessageLogEntry> log;
  std::vector<EncryptedDataset> encrypted;  // empty without EDS
  std::vector<StochasticLayer> stochastic_layers;
};

// Loads or generates the data, splits off the pooled holdout and partitions
// the remainder across clients.
FederationData PrepareFederation(const SimConfig& config);

// Server-side seed of client k's stochastic layer.
uint64_t StochasticSeed(uint64_t base_seed, size_t client);

// FedAvg / FedProx protocol, with or without encrypted data sharing.
SimulationResult RunFedEds(const SimConfig& config);
// FedNova protocol: clients send normalized deltas and |a_k|_1.
SimulationResult RunFedNovaEds(const SimConfig& config);
// Dispatches on config.method.
SimulationResult RunSimulation(const SimConfig& config);

double EvaluateTop1(const SegmentedParams& params, const Dataset& holdout);

// First round whose accuracy reaches `target`; nullopt if none does.
std::optional<int64_t> RoundsToTarget(std::span<const RoundMetrics> metrics,
                                      double target);

// Plain model trained on the pooled training split for `epochs` epochs;
// returns its holdout accuracy.
double CentralizedAccuracy(const SimConfig& config, int epochs);

inline constexpr std::string_view kMetricsHeader =
    "round,accuracy,mean_loss,e_t,lambda_c,lambda_dis,cum_seconds,"
    "cum_server_bytes,cum_peer_bytes";

std::string MetricsToCsv(std::span<const RoundMetrics> metrics);
std::vector<RoundMetrics> ParseMetricsCsv(std::string_view text);

}  // namespace fededs
