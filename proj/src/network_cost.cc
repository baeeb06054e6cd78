#include "fededs/network_cost.h"

#include <set>

#include "fededs/errors.h"

namespace fededs {

void NetworkCostModel::Validate() const {
  if (!(peer_rtt >= 0.0) || !(server_rtt >= peer_rtt)) {
    throw ConfigError("network model needs server_rtt >= peer_rtt >= 0");
  }
}

CommCost SimulateCommCost(const NetworkCostModel& model,
                          std::span<const MessageLogEntry> log,
                          int64_t up_to_round) {
  model.Validate();
  CommCost cost;
  std::set<int64_t> server_rounds, peer_rounds;
  for (const MessageLogEntry& m : log) {
    if (m.round > up_to_round) continue;
    if (m.tier == Tier::kServer) {
      cost.server_bytes += m.bytes;
      if (m.round >= 1) server_rounds.insert(m.round);
    } else {
      cost.peer_bytes += m.bytes;
      peer_rounds.insert(m.round);
    }
  }
  cost.server_seconds = model.server_rtt * static_cast<double>(server_rounds.size());
  cost.peer_seconds = model.peer_rtt * static_cast<double>(peer_rounds.size());
  return cost;
}

}  // namespace fededs
