#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <set>

#include "collab/fileshare/fileshare.hpp"
#include "collab/group/node.hpp"
#include "collab/identity/policy.hpp"
#include "collab/peerd/config.hpp"
#include "collab/peerd/event_log.hpp"
#include "collab/presence/presence.hpp"

namespace collab::peerd {

// Hooks that differ between the daemon and simulated runs. Left empty, the
// wall clock and system randomness are used.
struct PeerRuntime {
  std::function<std::int64_t()> wall_clock;
  std::function<std::int64_t()> cert_clock;
  std::shared_ptr<crypto::RandomSource> rng;
  group::GroupOptions group;
  std::size_t note_relay_cap = 1000;
  bool persist = true;  // notes, share manifest and pins under data_dir
};

identity::Identity load_or_create_identity(const std::filesystem::path& path, const std::string& subject,
                                           crypto::RandomSource& rng, std::int64_t now);

// One peer: identity, lobby membership, presence and file sharing over any
// transport. Everything except the event log runs on the transport's loop.
class Peer {
 public:
  Peer(netsim::Transport& transport, identity::Identity id, PeerConfig config, PeerRuntime runtime = {});
  ~Peer();
  Peer(const Peer&) = delete;
  Peer& operator=(const Peer&) = delete;

  // Joins the lobby (bootstrap contact or singleton) and indexes shares.
  void start();
  void save_state();

  const PeerConfig& config() const { return config_; }
  group::Node& node() { return *node_; }
  presence::Presence& presence() { return *presence_; }
  fileshare::FileShare& files() { return *files_; }
  identity::PolicyEngine& policy() { return policy_; }
  EventLog& events() { return events_; }
  group::GroupSession* lobby() { return lobby_; }
  std::int64_t wall() const;

  // Grants the "peer" attribute to a subject (owner-signed assertion).
  void grant_peer(const std::string& subject);

 private:
  void install_default_policy();
  identity::AuthzDecision authorize_file(const std::string& resource, const identity::IdentityCert& who);
  void on_lobby_message(const group::GroupMessage& m);
  void index_share_dirs();

  netsim::Transport& transport_;
  PeerConfig config_;
  PeerRuntime runtime_;
  EventLog events_;
  identity::PolicyEngine policy_;
  std::set<std::string> granted_;
  std::unique_ptr<group::Node> node_;
  std::unique_ptr<presence::Presence> presence_;
  std::unique_ptr<fileshare::FileShare> files_;
  group::GroupSession* lobby_ = nullptr;
};

}  // namespace collab::peerd
