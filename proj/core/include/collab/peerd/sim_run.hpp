#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "collab/netsim/scenario.hpp"

namespace collab::peerd {

// Wall-clock origin for simulated peers: wall time = kSimEpochMs + sim time.
constexpr std::int64_t kSimEpochMs = 1'700'000'000'000;

struct SimRunResult {
  netsim::TraceDigest digest;
  nlohmann::json summary;
};

// Runs full peers over the scenario's network. Peer i (0-based) lives at
// simulated node i+1, so fault groups name nodes 1..peers. Workload keys and
// defaults:
//   peers 4, settle_ms 10000, duration_ms 60000, beacon_ms 1000,
//   venue_messages 20, shares_per_peer 3, file_bytes 100000, queries 6,
//   fetches 2, notes 2, relay_notes true
// Scratch files go under workdir; nothing about their paths reaches the wire.
SimRunResult run_scenario(const netsim::Scenario& scenario, const std::filesystem::path& workdir);

}  // namespace collab::peerd
