#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "collab/group/node.hpp"
#include "collab/netsim/network.hpp"

namespace collab::testing {

constexpr std::int64_t kCertEpoch = 1'700'000'000'000;

struct Logged {
  membership::ViewId view;
  membership::ProcessId sender;
  std::uint64_t seq = 0;
  std::uint64_t ts = 0;
  ordcast::Mode mode = ordcast::Mode::fifo;
  Bytes payload;

  bool operator==(const Logged&) const = default;
};

struct Peer {
  std::unique_ptr<netsim::SimEndpoint> ep;
  std::unique_ptr<group::Node> node;
  group::GroupSession* session = nullptr;
  std::vector<membership::View> views;
  std::vector<Logged> log;
  std::vector<std::string> errors;
  std::size_t secured = 0;

  const std::optional<membership::View>& view() const { return session->view(); }
  std::vector<Logged> delivered_in(const membership::ViewId& v) const {
    std::vector<Logged> out;
    for (const auto& l : log) {
      if (l.view == v) out.push_back(l);
    }
    return out;
  }
};

identity::Identity sim_identity(std::uint64_t seed, std::size_t index);

// N simulated processes sharing one network, one node per host.
class Cluster {
 public:
  Cluster(std::uint64_t seed, netsim::LinkPolicy policy, std::size_t n, group::GroupOptions opts = {});

  netsim::Network& net() { return *net_; }
  Peer& operator[](std::size_t i) { return *peers_[i]; }
  std::size_t size() const { return peers_.size(); }
  const std::string& group_name() const { return group_; }

  // Starts peer i in the group, bootstrapping through peer `contact` (or alone).
  void start(std::size_t i, std::optional<std::size_t> contact);
  // Starts peer 0 alone and every other peer via peer 0.
  void start_all();
  // Runs until every listed peer has a secured view containing exactly them.
  bool settle(const std::vector<std::size_t>& members, netsim::SimTime cap);
  bool settle_all(netsim::SimTime cap);

  // One line per peer: view, keying and flush state. For failure messages.
  std::string describe();

  std::vector<membership::ProcessId> pids(const std::vector<std::size_t>& idx) const;
  netsim::EndpointAddr addr(std::size_t i) const { return netsim::EndpointAddr::sim(static_cast<std::uint32_t>(i + 1)); }

 private:
  std::unique_ptr<netsim::Network> net_;
  std::vector<std::unique_ptr<Peer>> peers_;
  std::string group_ = "cms";
  std::uint64_t seed_;
  group::GroupOptions opts_;
};

}  // namespace collab::testing
