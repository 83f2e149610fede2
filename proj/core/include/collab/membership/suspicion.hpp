#pragma once

#include <map>
#include <set>

#include "collab/membership/view.hpp"

namespace collab::membership {

struct SuspicionState {
  std::map<ProcessId, netsim::SimTime> last_heard;
  std::set<ProcessId> suspects;

  // Resets tracking to the members of a freshly installed view.
  void reset(const View& view, const ProcessId& self, netsim::SimTime now);
  void heard(const ProcessId& p, netsim::SimTime now);
};

// Members silent for longer than `timeout`, not already suspected. They are
// added to state.suspects.
std::set<ProcessId> suspicion_check(SuspicionState& state, netsim::SimTime now, netsim::SimTime timeout);

// Smallest member not in `suspects`.
std::optional<ProcessId> coordinator_of(const std::vector<ProcessId>& members, const std::set<ProcessId>& suspects);

}  // namespace collab::membership
