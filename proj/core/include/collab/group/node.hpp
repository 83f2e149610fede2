#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "collab/common/error.hpp"
#include "collab/group/session.hpp"
#include "collab/identity/trust.hpp"
#include "collab/netsim/transport.hpp"

namespace collab::group {

struct P2PMessage {
  identity::IdentityCert sender;
  netsim::EndpointAddr from;
  std::string service;
  Bytes payload;
};

// An opened boxed frame: the sender's (now trusted) certificate and payload.
struct Opened {
  identity::IdentityCert sender;
  Bytes payload;
};

struct NodeStats {
  std::uint64_t malformed = 0;
  std::uint64_t untrusted = 0;
  std::uint64_t bad_signatures = 0;
  std::uint64_t unknown_group = 0;
  std::uint64_t p2p_sent = 0;
  std::uint64_t p2p_received = 0;
  std::uint64_t p2p_rejected = 0;
};

struct NodeOptions {
  identity::TrustMode trust_mode = identity::TrustMode::incremental;
  // Time used for certificate validity checks; defaults to the wall clock.
  std::function<std::int64_t()> cert_clock;
};

// One process: a transport endpoint, an identity, the certificates it has
// accepted, and its group sessions.
class Node {
 public:
  Node(netsim::Transport& transport, identity::Identity id, std::shared_ptr<crypto::RandomSource> rng,
       NodeOptions options = {});
  ~Node();
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  const ProcessId& pid() const { return pid_; }
  const identity::Identity& identity() const { return id_; }
  netsim::Transport& transport() { return transport_; }
  crypto::RandomSource& rng() { return *rng_; }
  identity::TrustStore& trust() { return trust_; }
  std::int64_t cert_now() const;

  // Singleton bootstrap without a contact; otherwise asks the contact's group.
  GroupSession& join(const GroupId& group, std::optional<netsim::EndpointAddr> contact, GroupCallbacks callbacks,
                     GroupOptions options = {});
  // NOT_MEMBER when the group is not joined (or already left).
  Status leave(const GroupId& group);
  GroupSession* group(const GroupId& group);
  std::vector<GroupId> groups() const;

  // Certificate directory. learn_cert verifies through the trust store.
  Status learn_cert(const identity::IdentityCert& cert);
  const identity::IdentityCert* cert_of(const identity::Fingerprint& fp) const;
  bool verify_from(const ProcessId& signer, ByteView signed_part, const crypto::Signature& sig);

  // Boxed point-to-point message to a known identity.
  Status send_p2p(const netsim::EndpointAddr& dst, const identity::IdentityCert& recipient, const std::string& service,
                  ByteView payload);
  void on_p2p(const std::string& service, std::function<void(const P2PMessage&)> handler);

  // The same boxing for stream messages: authenticated and confidential
  // between two identities. open_sealed fails with UNTRUSTED, AUTH_FAIL,
  // DECODE or NOT_FOUND (addressed to someone else).
  Bytes seal_for(const identity::IdentityCert& recipient, ByteView payload);
  Result<Opened> open_sealed(ByteView frame);

  void send(const netsim::EndpointAddr& dst, Bytes frame);

  const NodeStats& stats() const { return stats_; }
  NodeStats& mutable_stats() { return stats_; }

 private:
  void on_datagram(const netsim::Datagram& d);
  void handle_p2p(const netsim::Datagram& d);
  void reply_left(const GroupId& group, const netsim::EndpointAddr& to);
  void reap();

  netsim::Transport& transport_;
  identity::Identity id_;
  std::shared_ptr<crypto::RandomSource> rng_;
  NodeOptions options_;
  ProcessId pid_;
  identity::TrustStore trust_;
  std::map<identity::Fingerprint, identity::IdentityCert> certs_;
  std::map<GroupId, std::unique_ptr<GroupSession>> groups_;
  std::vector<std::unique_ptr<GroupSession>> graveyard_;
  struct Left {
    ViewId view;
    std::map<netsim::EndpointAddr, netsim::SimTime> replied;
  };
  std::map<GroupId, Left> left_;
  std::map<std::string, std::function<void(const P2PMessage&)>> p2p_handlers_;
  NodeStats stats_;
  std::optional<netsim::TimerId> reap_timer_;
};

}  // namespace collab::group
