#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace fededs {

enum class Tier { kServer, kPeer };

enum class MessageKind {
  kGlobalParams,
  kClientParams,
  kClientDelta,
  kEncryptedDataset,
  kStochasticLayer,
};

// Round 0 is the setup phase before the first communication round.
struct MessageLogEntry {
  int64_t round = 0;
  Tier tier = Tier::kServer;
  MessageKind kind = MessageKind::kGlobalParams;
  size_t from = 0;
  size_t to = 0;
  uint64_t bytes = 0;
};

// Two-tier latency model: a slow client<->server link and fast peer links.
struct NetworkCostModel {
  double server_rtt = 300.0;  // simulated seconds per aggregation round
  double peer_rtt = 1.0;      // simulated seconds per peer transfer

  void Validate() const;
};

struct CommCost {
  double server_seconds = 0.0;
  double peer_seconds = 0.0;
  uint64_t server_bytes = 0;
  uint64_t peer_bytes = 0;

  double total_seconds() const { return server_seconds + peer_seconds; }
};

// Bytes add up per tier. Time is server_rtt for every communication round
// (>= 1) that carries server traffic plus peer_rtt for every round that
// carries peer traffic; transfers inside one round run concurrently and
// count once. Setup-phase server distribution adds bytes but no latency.
// Entries with round > up_to_round are ignored.
CommCost SimulateCommCost(const NetworkCostModel& model,
                          std::span<const MessageLogEntry> log,
                          int64_t up_to_round = INT64_MAX);

}  // namespace fededs
