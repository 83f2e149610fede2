#pragma once

#include <filesystem>
#include <vector>

#include <nlohmann/json.hpp>

#include "collab/netsim/network.hpp"

namespace collab::netsim {

struct ScheduledFault {
  SimTime at = 0;
  Fault fault;
};

// Scenario file:
//   {seed, policy:{loss_prob, delay_min_ms, delay_max_ms, duplicate_prob, reorder},
//    faults:[{at_ms, kind, args}], workload:{...}}
// Partition groups list addresses either as "<hex>:<port>" strings or as
// integers naming simulated nodes.
struct Scenario {
  std::uint64_t seed = 0;
  LinkPolicy policy;
  std::vector<ScheduledFault> faults;
  nlohmann::json workload = nlohmann::json::object();

  static Scenario from_json(const nlohmann::json& doc);
  static Scenario load(const std::filesystem::path& path);

  // Builds the network and queues every fault.
  std::unique_ptr<Network> make_network() const;
};

EndpointAddr addr_from_json(const nlohmann::json& v);

}  // namespace collab::netsim
