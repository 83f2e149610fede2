#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "collab/group/wire.hpp"
#include "collab/membership/suspicion.hpp"
#include "collab/netsim/transport.hpp"
#include "collab/ordcast/delivery.hpp"
#include "collab/sgl/algebra.hpp"
#include "collab/sgl/gdh.hpp"

namespace collab::group {

class Node;

struct GroupOptions {
  netsim::SimTime tick_ms = 50;
  netsim::SimTime heartbeat_ms = 500;
  netsim::SimTime suspicion_timeout_ms = 1500;
  netsim::SimTime eager_heartbeat_ms = 20;
  netsim::SimTime nack_delay_ms = 200;
  netsim::SimTime nack_max_ms = 3200;
  netsim::SimTime retransmit_ms = 300;
  netsim::SimTime phase_timeout_ms = 2000;
  netsim::SimTime abandon_ms = 5000;
  netsim::SimTime join_retry_ms = 500;
  int join_attempts = 10;
  netsim::SimTime probe_ms = 1000;
  netsim::SimTime rekey_timeout_ms = 5000;
  std::size_t unstable_window = ordcast::kUnstableWindow;
  std::string algebra = "ristretto255";
  std::uint64_t counter_limit = UINT64_MAX;
  // Coordinator-side admission check for joiners and merged members.
  std::function<bool(const ProcessId&, const identity::IdentityCert&)> admit;
};

struct GroupMessage {
  GroupId group;
  ViewId view;
  ProcessId sender;
  std::uint64_t seq = 0;
  std::uint64_t ts = 0;
  ordcast::Mode mode = ordcast::Mode::fifo;
  Bytes payload;
};

struct GroupCallbacks {
  std::function<void(const View&)> on_view;
  std::function<void(const GroupMessage&)> on_message;
  std::function<void(const View&)> on_secure;  // key agreement finished for the view
  std::function<void(Errc, const std::string&)> on_error;
};

struct GroupStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t auth_failures = 0;
  std::uint64_t replays = 0;
  std::uint64_t stale_epoch = 0;
  std::uint64_t malformed = 0;
  std::uint64_t bad_signatures = 0;
  std::uint64_t stale_frames = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t nacks_sent = 0;
  std::uint64_t retransmits = 0;
  std::uint64_t views_installed = 0;
  std::uint64_t proposals = 0;
  std::uint64_t suspicions = 0;
  std::uint64_t flush_delivered = 0;
  std::size_t max_buffered = 0;
  std::size_t max_unstable_own = 0;
};

enum class SessionState { joining, member, left };

// Membership, ordered delivery and the secure group layer for one group at
// one process. Everything runs on the owning transport's event queue.
class GroupSession {
 public:
  GroupSession(Node& node, GroupId group, GroupCallbacks callbacks, GroupOptions options);
  ~GroupSession();
  GroupSession(const GroupSession&) = delete;
  GroupSession& operator=(const GroupSession&) = delete;

  void start(std::optional<netsim::EndpointAddr> contact);

  // NOT_MEMBER after leave, NOT_IN_VIEW while joining, OVERSIZE above 64 KiB.
  // Queued while a view change or key agreement is in progress.
  Status multicast(ByteView payload, ordcast::Mode mode);

  const GroupId& name() const { return group_; }
  SessionState state() const { return state_; }
  const std::optional<View>& view() const { return view_; }
  bool secure() const { return keys_ != nullptr; }
  bool changing() const { return pending_.has_value(); }
  std::shared_ptr<const sgl::KeyMaterial> keys() const { return keys_; }
  const GroupStats& stats() const { return stats_; }
  std::size_t queued() const { return outbox_.size(); }
  const ordcast::DeliveryState* delivery() const { return ds_.get(); }
  const std::set<ProcessId>& suspects() const { return susp_.suspects; }
  const GroupOptions& options() const { return opt_; }

  void add_known(const netsim::EndpointAddr& addr);
  void request_rekey();

  // Node plumbing.
  void handle_frame(const Envelope& env, const netsim::Datagram& d);
  void handle_data(const netsim::Datagram& d);
  void leave_now();

 private:
  struct Report {
    std::optional<View> old_view;
    std::vector<std::uint64_t> contiguous;
  };
  struct Coord {
    View view;
    enum class Phase { acks, flushing } phase = Phase::acks;
    std::map<ProcessId, Report> acks;
    std::set<ProcessId> done;
    std::vector<ordcast::OldViewCut> cuts;
    netsim::SimTime phase_started = 0;
    netsim::SimTime last_tx = 0;
  };
  struct Pending {
    View view;
    ProcessId proposer;
    netsim::SimTime accepted_at = 0;
    netsim::SimTime last_tx = 0;
    bool cut_known = false;
    std::optional<ordcast::OldViewCut> cut;  // for the old view this member leaves
    bool done = false;
  };
  struct NackState {
    netsim::SimTime due = 0;
    netsim::SimTime backoff = 0;
    std::uint64_t first_missing = 0;
  };
  struct Outgoing {
    Bytes payload;
    ordcast::Mode mode;
  };

  netsim::SimTime now() const;
  const identity::Identity& me() const;
  void arm_tick();
  void tick();
  void send_to(const ProcessId& p, const Bytes& frame);
  void broadcast(const Bytes& frame, bool include_self = false);
  bool is_coordinator() const;
  std::set<ProcessId> excluded() const;

  bool accept_cert(const identity::IdentityCert& cert, const ProcessId& claimed);
  bool verify_known(const ProcessId& signer, const Envelope& env);

  // membership
  void send_join();
  void install_singleton(std::uint64_t epoch);
  void install(const View& view, const std::vector<identity::IdentityCert>& certs);
  void maybe_start_view_change();
  void propose(std::vector<ProcessId> members);
  void send_ack(const ProcessId& proposer, const ViewId& proposal, bool accept);
  void abandon_pending();
  void try_finish_flush();
  void coord_tick(netsim::SimTime t);
  void suspect(const ProcessId& p);

  void on_join(const JoinReq& j, const Envelope& env, const netsim::Datagram& d);
  void on_propose(const Propose& p, const Envelope& env);
  void on_ack(const Ack& a, const Envelope& env);
  void on_flush_cut(const FlushCut& f, const Envelope& env);
  void on_flush_vec(const FlushVec& f, const Envelope& env);
  void on_install(const Install& i, const Envelope& env);
  void on_leave(const Leave& l, const Envelope& env);
  void on_probe(const Probe& p, const Envelope& env);
  void on_heartbeat(const Heartbeat& h, const Envelope& env);
  void on_nack(const Nack& n, const Envelope& env);

  // ordcast
  void send_heartbeat();
  void schedule_eager_heartbeat();
  void service_nacks(netsim::SimTime t);
  void process_data(const Bytes& frame);
  void after_receive();
  void dispatch(std::vector<ordcast::Delivery> deliveries, const View& in_view);
  void pump_outbox();
  void send_app(const Outgoing& out);
  void send_control(const Bytes& payload);

  // sgl
  void start_keying();
  void on_control(const ordcast::Delivery& d);
  void key_done();

  Node& node_;
  GroupId group_;
  GroupCallbacks cb_;
  GroupOptions opt_;
  std::shared_ptr<const sgl::GroupAlgebra> algebra_;
  ProcessId self_;
  SessionState state_ = SessionState::joining;

  std::optional<View> view_;
  std::uint32_t my_index_ = 0;
  std::unique_ptr<ordcast::DeliveryState> ds_;
  netsim::SimTime installed_at_ = 0;
  std::set<ProcessId> heard_since_install_;
  membership::SuspicionState susp_;
  std::uint64_t max_epoch_ = 0;
  std::set<netsim::EndpointAddr> known_;

  std::set<ProcessId> joiners_;
  std::set<ProcessId> leavers_;
  std::set<ProcessId> merge_;
  bool rekey_requested_ = false;
  std::optional<Coord> coord_;
  std::optional<Bytes> last_install_;
  std::optional<ViewId> last_install_id_;
  std::optional<Pending> pending_;

  std::optional<netsim::EndpointAddr> contact_;
  int join_attempts_ = 0;
  netsim::SimTime next_join_ = 0;

  netsim::SimTime next_heartbeat_ = 0;
  netsim::SimTime next_probe_ = 0;
  bool eager_pending_ = false;
  std::map<std::uint32_t, NackState> nacks_;
  std::map<ViewId, std::vector<Bytes>> future_;
  std::size_t future_count_ = 0;
  std::map<std::pair<std::uint32_t, std::uint64_t>, Bytes> key_pending_;

  std::unique_ptr<sgl::GdhSession> gdh_;
  std::shared_ptr<const sgl::KeyMaterial> keys_;
  std::unique_ptr<sgl::Sealer> sealer_;
  std::unique_ptr<sgl::Opener> opener_;

  std::deque<Outgoing> outbox_;
  GroupStats stats_;
  std::vector<netsim::TimerId> timers_;
  std::optional<netsim::TimerId> tick_timer_;
  std::optional<netsim::TimerId> eager_timer_;
};

}  // namespace collab::group
