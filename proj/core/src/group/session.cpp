#include "collab/group/session.hpp"

#include <algorithm>

#include "collab/group/node.hpp"

namespace collab::group {

using netsim::SimTime;
using ordcast::Mode;

namespace {

constexpr std::size_t kMaxFutureFrames = 8192;
constexpr std::size_t kMaxNackRanges = 32;
constexpr std::size_t kMaxRetransmitPerNack = 256;

}  // namespace

GroupSession::GroupSession(Node& node, GroupId group, GroupCallbacks callbacks, GroupOptions options)
    : node_(node),
      group_(std::move(group)),
      cb_(std::move(callbacks)),
      opt_(std::move(options)),
      algebra_(sgl::group_by_name(opt_.algebra)),
      self_(node.pid()) {
  membership::validate_group_name(group_);
}

GroupSession::~GroupSession() {
  auto& t = node_.transport();
  if (tick_timer_) t.cancel(*tick_timer_);
  if (eager_timer_) t.cancel(*eager_timer_);
}

SimTime GroupSession::now() const { return node_.transport().now(); }
const identity::Identity& GroupSession::me() const { return node_.identity(); }

void GroupSession::arm_tick() {
  tick_timer_ = node_.transport().schedule(opt_.tick_ms, [this] {
    tick_timer_.reset();
    tick();
    if (state_ != SessionState::left) arm_tick();
  });
}

void GroupSession::start(std::optional<netsim::EndpointAddr> contact) {
  if (!contact) {
    install_singleton(1);
  } else {
    state_ = SessionState::joining;
    contact_ = contact;
    add_known(*contact);
    send_join();
  }
  arm_tick();
}

void GroupSession::add_known(const netsim::EndpointAddr& addr) {
  if (addr != self_.addr) known_.insert(addr);
}

void GroupSession::send_to(const ProcessId& p, const Bytes& frame) { node_.send(p.addr, frame); }

void GroupSession::broadcast(const Bytes& frame, bool include_self) {
  if (!view_) return;
  for (const auto& m : view_->members) {
    if (m == self_ && !include_self) continue;
    send_to(m, frame);
  }
}

std::set<ProcessId> GroupSession::excluded() const {
  std::set<ProcessId> out = susp_.suspects;
  out.insert(leavers_.begin(), leavers_.end());
  return out;
}

bool GroupSession::is_coordinator() const {
  if (!view_) return false;
  auto c = membership::coordinator_of(view_->members, excluded());
  return c && *c == self_;
}

bool GroupSession::accept_cert(const identity::IdentityCert& cert, const ProcessId& claimed) {
  if (cert.fingerprint() != claimed.fingerprint) {
    ++stats_.bad_signatures;
    return false;
  }
  if (!node_.learn_cert(cert)) return false;
  return true;
}

bool GroupSession::verify_known(const ProcessId& signer, const Envelope& env) {
  if (!node_.verify_from(signer, env.signed_part, env.signature)) {
    ++stats_.bad_signatures;
    return false;
  }
  return true;
}

Status GroupSession::multicast(ByteView payload, Mode mode) {
  if (state_ == SessionState::left) return Error(Errc::not_member, "not a member of " + group_);
  if (payload.size() > ordcast::kMaxMessage) return Error(Errc::oversize, "message exceeds 64 KiB");
  if (!view_) return Error(Errc::not_in_view, "no installed view yet for " + group_);
  outbox_.push_back({Bytes(payload.begin(), payload.end()), mode});
  pump_outbox();
  return ok_status();
}

// ---------------------------------------------------------------- timers

void GroupSession::tick() {
  if (state_ == SessionState::left) return;
  const SimTime t = now();

  if (state_ == SessionState::joining && !pending_ && t >= next_join_) {
    if (join_attempts_ >= opt_.join_attempts) {
      install_singleton(max_epoch_ + 1);
      if (cb_.on_error) cb_.on_error(Errc::unreachable, "join contact unreachable; running as a singleton view");
      if (state_ == SessionState::left) return;
    } else {
      send_join();
    }
  }

  if (view_ && ds_) {
    if (t >= next_heartbeat_) send_heartbeat();
    auto fresh = membership::suspicion_check(susp_, t, opt_.suspicion_timeout_ms);
    stats_.suspicions += fresh.size();
    service_nacks(t);
    if (!pending_ && !coord_ && is_coordinator() && t >= next_probe_) {
      next_probe_ = t + opt_.probe_ms;
      std::set<netsim::EndpointAddr> inside;
      for (const auto& m : view_->members) inside.insert(m.addr);
      Bytes frame;
      for (const auto& addr : known_) {
        if (inside.count(addr) != 0) continue;
        if (frame.empty()) frame = Probe{*view_, self_, me().cert}.encode(me());
        node_.send(addr, frame);
      }
    }
    if (!keys_ && !pending_ && !coord_ && t - installed_at_ > opt_.rekey_timeout_ms) {
      installed_at_ = t;  // one request per timeout period
      request_rekey();
    }
  }

  if (pending_) {
    if (t - pending_->accepted_at > opt_.abandon_ms) {
      abandon_pending();
    } else if (pending_->cut_known && !pending_->done) {
      try_finish_flush();
    } else if (pending_->done && t - pending_->last_tx >= opt_.retransmit_ms) {
      pending_->last_tx = t;
      FlushVec fv{group_, pending_->view.id, self_, ds_ ? ds_->delivered_vector() : std::vector<std::uint64_t>{}};
      send_to(pending_->proposer, fv.encode(me()));
    }
  }

  coord_tick(t);
  maybe_start_view_change();
}

void GroupSession::coord_tick(SimTime t) {
  if (!coord_) return;
  auto& c = *coord_;
  if (t - c.phase_started > opt_.phase_timeout_ms) {
    bool acks = c.phase == Coord::Phase::acks;
    for (const auto& m : c.view.members) {
      bool responded = acks ? c.acks.count(m) != 0 : c.done.count(m) != 0;
      if (responded || m == self_) continue;
      joiners_.erase(m);
      merge_.erase(m);
      if (view_ && view_->contains(m)) susp_.suspects.insert(m);
      ++stats_.suspicions;
    }
    coord_.reset();
    maybe_start_view_change();
    return;
  }
  if (t - c.last_tx < opt_.retransmit_ms) return;
  c.last_tx = t;
  if (c.phase == Coord::Phase::acks) {
    auto frame = Propose{c.view, self_, me().cert}.encode(me());
    for (const auto& m : c.view.members) {
      if (c.acks.count(m) == 0) send_to(m, frame);
    }
  } else {
    auto frame = FlushCut{group_, c.view.id, self_, c.cuts}.encode(me());
    for (const auto& m : c.view.members) {
      if (c.done.count(m) == 0) send_to(m, frame);
    }
  }
}

// ------------------------------------------------------------ membership

void GroupSession::send_join() {
  ++join_attempts_;
  next_join_ = now() + opt_.join_retry_ms;
  JoinReq j{group_, self_, max_epoch_, me().cert};
  node_.send(*contact_, j.encode(me()));
}

void GroupSession::install_singleton(std::uint64_t epoch) {
  View v;
  v.group = group_;
  v.id = ViewId{epoch, self_};
  v.members = {self_};
  install(v, {});
}

void GroupSession::suspect(const ProcessId& p) {
  if (p == self_ || !view_ || !view_->contains(p)) return;
  if (susp_.suspects.insert(p).second) ++stats_.suspicions;
  maybe_start_view_change();
}

void GroupSession::request_rekey() {
  rekey_requested_ = true;
  maybe_start_view_change();
}

void GroupSession::maybe_start_view_change() {
  if (state_ != SessionState::member || !view_) return;
  if (pending_ && pending_->proposer != self_) return;
  if (!is_coordinator()) return;
  auto excl = excluded();
  std::vector<ProcessId> desired;
  for (const auto& m : view_->members) {
    if (excl.count(m) == 0 || merge_.count(m) != 0) desired.push_back(m);
  }
  desired.insert(desired.end(), joiners_.begin(), joiners_.end());
  desired.insert(desired.end(), merge_.begin(), merge_.end());
  desired = membership::sorted_unique(std::move(desired));
  desired.erase(std::remove_if(desired.begin(), desired.end(), [&](const ProcessId& p) { return leavers_.count(p) != 0; }),
                desired.end());
  if (coord_) {
    if (coord_->view.members == desired) return;
  } else {
    bool changed = desired != view_->members || rekey_requested_ || !joiners_.empty();
    if (!changed) return;
  }
  propose(std::move(desired));
}

void GroupSession::propose(std::vector<ProcessId> members) {
  max_epoch_ = std::max(max_epoch_, view_ ? view_->epoch() : 0) + 1;
  View v;
  v.group = group_;
  v.id = ViewId{max_epoch_, self_};
  v.members = std::move(members);
  coord_ = Coord{};
  coord_->view = v;
  coord_->phase_started = now();
  coord_->last_tx = now();
  ++stats_.proposals;
  auto frame = Propose{v, self_, me().cert}.encode(me());
  for (const auto& m : v.members) send_to(m, frame);
}

void GroupSession::send_ack(const ProcessId& proposer, const ViewId& proposal, bool accept) {
  Ack a;
  a.group = group_;
  a.proposal = proposal;
  a.acker = self_;
  a.accept = accept;
  a.max_epoch = std::max(max_epoch_, view_ ? view_->epoch() : 0);
  if (accept && view_ && ds_) {
    a.old_view = view_;
    a.contiguous = ds_->contiguous_vector();
  }
  a.cert = me().cert;
  send_to(proposer, a.encode(me()));
}

void GroupSession::abandon_pending() {
  pending_.reset();
  if (ds_) ds_->thaw();
  if (state_ == SessionState::joining) next_join_ = now();
  after_receive();
}

void GroupSession::on_join(const JoinReq& j, const Envelope& env, const netsim::Datagram& d) {
  if (!accept_cert(j.cert, j.joiner) || !verify_known(j.joiner, env)) return;
  max_epoch_ = std::max(max_epoch_, j.max_epoch);
  if (state_ != SessionState::member || !view_) return;
  if (view_->contains(j.joiner) && heard_since_install_.count(j.joiner) != 0) return;  // stale retry
  if (opt_.admit && !opt_.admit(j.joiner, j.cert)) return;
  add_known(j.joiner.addr);
  if (!is_coordinator()) {
    auto c = membership::coordinator_of(view_->members, excluded());
    if (c && c->addr != d.src) node_.send(c->addr, d.payload);
    return;
  }
  joiners_.insert(j.joiner);
  maybe_start_view_change();
}

void GroupSession::on_propose(const Propose& p, const Envelope& env) {
  if (!accept_cert(p.cert, p.proposer) || !verify_known(p.proposer, env)) return;
  if (p.view.id.initiator != p.proposer) return;
  max_epoch_ = std::max(max_epoch_, p.view.epoch());
  if (state_ == SessionState::left || !p.view.contains(self_)) return;
  if (view_ && p.view.epoch() <= view_->epoch()) {
    send_ack(p.proposer, p.view.id, false);
    return;
  }
  if (pending_) {
    if (pending_->view.id == p.view.id) {
      if (!pending_->cut_known) send_ack(p.proposer, p.view.id, true);
      return;
    }
    if (!superior(p.view.id, pending_->view.id)) return;
  }
  if (coord_ && p.proposer != self_) {
    if (!superior(p.view.id, coord_->view.id)) return;
    coord_.reset();
  }
  pending_ = Pending{};
  pending_->view = p.view;
  pending_->proposer = p.proposer;
  pending_->accepted_at = now();
  pending_->last_tx = now();
  if (ds_) ds_->freeze();
  send_ack(p.proposer, p.view.id, true);
}

void GroupSession::on_ack(const Ack& a, const Envelope& env) {
  if (!accept_cert(a.cert, a.acker) || !verify_known(a.acker, env)) return;
  max_epoch_ = std::max(max_epoch_, a.max_epoch);
  if (!coord_ || a.proposal != coord_->view.id || !coord_->view.contains(a.acker)) return;
  if (!a.accept) {
    if (a.max_epoch >= coord_->view.epoch()) {
      auto members = coord_->view.members;
      propose(std::move(members));
    }
    return;
  }
  if (coord_->phase == Coord::Phase::flushing) {
    if (coord_->done.count(a.acker) == 0) {
      send_to(a.acker, FlushCut{group_, coord_->view.id, self_, coord_->cuts}.encode(me()));
    }
    return;
  }
  coord_->acks[a.acker] = Report{a.old_view, a.contiguous};
  if (coord_->acks.size() < coord_->view.members.size()) return;
  std::vector<ordcast::FlushReport> reports;
  for (const auto& [who, r] : coord_->acks) reports.push_back({who, r.old_view, r.contiguous});
  coord_->cuts = ordcast::compute_cuts(reports);
  coord_->phase = Coord::Phase::flushing;
  coord_->phase_started = now();
  coord_->last_tx = now();
  auto frame = FlushCut{group_, coord_->view.id, self_, coord_->cuts}.encode(me());
  for (const auto& m : coord_->view.members) send_to(m, frame);
}

void GroupSession::on_flush_cut(const FlushCut& f, const Envelope& env) {
  if (!verify_known(f.coordinator, env)) return;
  if (!pending_ || f.proposal != pending_->view.id || f.coordinator != pending_->proposer) return;
  if (pending_->cut_known) {
    if (pending_->done) {
      FlushVec fv{group_, pending_->view.id, self_, ds_ ? ds_->delivered_vector() : std::vector<std::uint64_t>{}};
      send_to(pending_->proposer, fv.encode(me()));
    }
    return;
  }
  pending_->cut_known = true;
  if (view_) {
    for (const auto& c : f.cuts) {
      if (c.old_view == view_->id && c.cut.size() == view_->members.size()) pending_->cut = c;
    }
    if (!pending_->cut) {
      // Our report was not counted; fall back to what we hold ourselves.
      ordcast::OldViewCut own;
      own.old_view = view_->id;
      own.cut = ds_->contiguous_vector();
      own.provider.assign(own.cut.size(), self_);
      pending_->cut = own;
    }
    for (std::uint32_t s = 0; s < pending_->cut->cut.size(); ++s) ds_->note_known(s, pending_->cut->cut[s]);
  }
  try_finish_flush();
}

void GroupSession::try_finish_flush() {
  if (!pending_ || !pending_->cut_known || pending_->done) return;
  if (view_ && ds_ && pending_->cut) {
    const auto& cut = *pending_->cut;
    for (std::uint32_t s = 0; s < cut.cut.size(); ++s) {
      if (ds_->contiguous(s) < cut.cut[s]) return;  // service_nacks fetches from providers
    }
    auto before = stats_.delivered;
    auto delivered = ds_->deliver_cut(cut.cut);
    View old = *view_;
    dispatch(std::move(delivered), old);
    stats_.flush_delivered += stats_.delivered - before;
    if (state_ == SessionState::left || !pending_) return;
  }
  pending_->done = true;
  pending_->last_tx = now();
  FlushVec fv{group_, pending_->view.id, self_, ds_ ? ds_->delivered_vector() : std::vector<std::uint64_t>{}};
  send_to(pending_->proposer, fv.encode(me()));
}

void GroupSession::on_flush_vec(const FlushVec& f, const Envelope& env) {
  if (!verify_known(f.reporter, env)) return;
  if (last_install_ && last_install_id_ && f.proposal == *last_install_id_) {
    send_to(f.reporter, *last_install_);
    return;
  }
  if (!coord_ || f.proposal != coord_->view.id || coord_->phase != Coord::Phase::flushing) return;
  if (!coord_->view.contains(f.reporter)) return;
  coord_->done.insert(f.reporter);
  if (coord_->done.size() < coord_->view.members.size()) return;
  Install ins;
  ins.view = coord_->view;
  ins.coordinator = self_;
  for (const auto& m : ins.view.members) {
    if (const auto* c = node_.cert_of(m.fingerprint)) ins.certs.push_back(*c);
  }
  auto frame = ins.encode(me());
  last_install_ = frame;
  last_install_id_ = ins.view.id;
  for (const auto& m : ins.view.members) send_to(m, frame);
}

void GroupSession::on_install(const Install& i, const Envelope& env) {
  if (!verify_known(i.coordinator, env)) return;
  if (!pending_ || i.view.id != pending_->view.id || i.coordinator != pending_->proposer) return;
  if (!pending_->done || i.view != pending_->view) return;
  install(i.view, i.certs);
}

void GroupSession::install(const View& view, const std::vector<identity::IdentityCert>& certs) {
  for (const auto& c : certs) node_.learn_cert(c);
  const SimTime t = now();
  view_ = view;
  my_index_ = static_cast<std::uint32_t>(*view.index_of(self_));
  ds_ = std::make_unique<ordcast::DeliveryState>(view.members.size(), my_index_);
  installed_at_ = t;
  heard_since_install_.clear();
  susp_.reset(view, self_, t);
  max_epoch_ = std::max(max_epoch_, view.epoch());
  state_ = SessionState::member;
  pending_.reset();
  if (coord_ && coord_->view.id == view.id) coord_.reset();
  for (const auto& m : view.members) {
    joiners_.erase(m);
    merge_.erase(m);
    add_known(m.addr);
  }
  std::erase_if(leavers_, [&](const ProcessId& p) { return !view.contains(p); });
  rekey_requested_ = false;
  nacks_.clear();
  key_pending_.clear();
  gdh_.reset();
  keys_.reset();
  sealer_.reset();
  opener_.reset();
  next_heartbeat_ = t;
  next_probe_ = t + opt_.probe_ms;
  ++stats_.views_installed;

  if (cb_.on_view) cb_.on_view(view);
  if (state_ == SessionState::left) return;
  start_keying();
  if (state_ == SessionState::left) return;

  // Frames that raced ahead of the install.
  std::vector<Bytes> early;
  if (auto it = future_.find(view.id); it != future_.end()) early = std::move(it->second);
  for (auto it = future_.begin(); it != future_.end();) {
    if (it->first.epoch <= view.epoch()) {
      future_count_ -= it->second.size();
      it = future_.erase(it);
    } else {
      ++it;
    }
  }
  future_count_ -= std::min(future_count_, early.size());
  for (const auto& f : early) process_data(f);
  after_receive();
}

void GroupSession::on_leave(const Leave& l, const Envelope& env) {
  if (!accept_cert(l.cert, l.leaver) || !verify_known(l.leaver, env)) return;
  known_.erase(l.leaver.addr);
  joiners_.erase(l.leaver);
  merge_.erase(l.leaver);
  if (!view_ || !view_->contains(l.leaver) || l.leaver == self_) return;
  leavers_.insert(l.leaver);
  maybe_start_view_change();
}

void GroupSession::on_probe(const Probe& p, const Envelope& env) {
  if (!accept_cert(p.cert, p.sender) || !verify_known(p.sender, env)) return;
  max_epoch_ = std::max(max_epoch_, p.view.epoch());
  if (state_ != SessionState::member || !view_ || p.sender == self_) return;
  add_known(p.sender.addr);
  if (p.view.id == view_->id) return;
  if (view_->contains(p.sender)) {
    // A member of ours is running another view: it is not with us any more.
    if (!p.view.contains(self_)) suspect(p.sender);
    return;
  }
  if (!is_coordinator()) return;
  bool covered = std::all_of(p.view.members.begin(), p.view.members.end(),
                             [&](const ProcessId& m) { return view_->contains(m) && excluded().count(m) == 0; });
  if (covered) return;
  if (self_ < p.sender) {
    for (const auto& m : p.view.members) {
      const auto* cert = node_.cert_of(m.fingerprint);
      if (opt_.admit && cert != nullptr && !opt_.admit(m, *cert)) continue;
      merge_.insert(m);
    }
    maybe_start_view_change();
  } else if (!pending_ && !coord_) {
    node_.send(p.sender.addr, Probe{*view_, self_, me().cert}.encode(me()));
  }
}

// --------------------------------------------------------------- ordcast

void GroupSession::send_heartbeat() {
  if (!view_ || !ds_) return;
  next_heartbeat_ = now() + opt_.heartbeat_ms;
  if (view_->members.size() == 1) return;
  Heartbeat h{group_, view_->id, self_, ds_->clock(), ds_->sent(), ds_->delivered_vector()};
  broadcast(h.encode(me()));
}

void GroupSession::schedule_eager_heartbeat() {
  if (eager_pending_ || opt_.eager_heartbeat_ms <= 0) return;
  eager_pending_ = true;
  eager_timer_ = node_.transport().schedule(opt_.eager_heartbeat_ms, [this] {
    eager_pending_ = false;
    eager_timer_.reset();
    if (state_ != SessionState::left) send_heartbeat();
  });
}

void GroupSession::on_heartbeat(const Heartbeat& h, const Envelope& env) {
  if (!view_ || h.view != view_->id) return;
  auto idx = view_->index_of(h.sender);
  if (!idx || *idx == my_index_) return;
  if (!verify_known(h.sender, env)) return;
  susp_.heard(h.sender, now());
  heard_since_install_.insert(h.sender);
  ds_->on_heartbeat(static_cast<std::uint32_t>(*idx), h.ts, h.max_seq);
  ds_->on_ack_vector(static_cast<std::uint32_t>(*idx), h.delivered);
  after_receive();
}

void GroupSession::service_nacks(SimTime t) {
  if (!view_ || !ds_) return;
  const auto n = static_cast<std::uint32_t>(view_->members.size());
  const ordcast::OldViewCut* cut = pending_ && pending_->cut ? &*pending_->cut : nullptr;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (s == my_index_) continue;
    auto cap = cut ? cut->cut[s] : UINT64_MAX;
    auto missing = ds_->missing(s, cap);
    std::erase_if(missing, [&](const ordcast::SeqRange& r) {
      for (auto q = r.from; q <= r.to; ++q) {
        if (key_pending_.count({s, q}) == 0) return false;
      }
      return true;
    });
    if (missing.empty()) {
      nacks_.erase(s);
      continue;
    }
    auto it = nacks_.find(s);
    if (it == nacks_.end() || it->second.first_missing != missing.front().from) {
      nacks_[s] = NackState{t + opt_.nack_delay_ms, opt_.nack_delay_ms, missing.front().from};
      continue;
    }
    auto& st = it->second;
    if (t < st.due) continue;
    if (missing.size() > kMaxNackRanges) missing.resize(kMaxNackRanges);
    Nack nack{group_, view_->id, self_, view_->members[s], missing};
    auto frame = nack.encode(me());
    std::vector<ProcessId> targets;
    if (cut) {
      if (cut->provider[s] != self_) targets.push_back(cut->provider[s]);
      if (cut->provider[s] != view_->members[s]) targets.push_back(view_->members[s]);
    } else {
      targets.push_back(view_->members[s]);
      // One alternate holder: the next member after the sender that is not us.
      for (std::uint32_t k = 1; k < n; ++k) {
        auto alt = (s + k) % n;
        if (alt != my_index_ && alt != s) {
          targets.push_back(view_->members[alt]);
          break;
        }
      }
    }
    for (const auto& p : targets) send_to(p, frame);
    stats_.nacks_sent += targets.size();
    st.backoff = std::min(st.backoff * 2, opt_.nack_max_ms);
    st.due = t + st.backoff;
  }
}

void GroupSession::on_nack(const Nack& n, const Envelope& env) {
  if (!view_ || !ds_ || n.view != view_->id || !view_->contains(n.requester)) return;
  if (!verify_known(n.requester, env)) return;
  auto idx = view_->index_of(n.target);
  if (!idx) return;
  std::size_t sent = 0;
  for (const auto& r : n.ranges) {
    for (const Bytes* frame : ds_->stored(static_cast<std::uint32_t>(*idx), r)) {
      if (sent++ >= kMaxRetransmitPerNack) return;
      send_to(n.requester, *frame);
      ++stats_.retransmits;
    }
  }
}

void GroupSession::handle_data(const netsim::Datagram& d) {
  Bytes frame = d.payload;
  DataFrame f;
  try {
    f = DataFrame::decode(frame);
  } catch (const Error&) {
    ++stats_.malformed;
    return;
  }
  if (!view_ || f.header.view != view_->id) {
    if (!view_ || f.header.view.epoch > view_->epoch()) {
      if (future_count_ < kMaxFutureFrames) {
        future_[f.header.view].push_back(std::move(frame));
        ++future_count_;
      }
    } else {
      ++stats_.stale_frames;
    }
    return;
  }
  process_data(frame);
  after_receive();
}

void GroupSession::process_data(const Bytes& frame) {
  DataFrame f;
  try {
    f = DataFrame::decode(frame);
  } catch (const Error&) {
    ++stats_.malformed;
    return;
  }
  const auto& h = f.header;
  if (!view_ || h.view != view_->id || h.group != group_) {
    ++stats_.stale_frames;
    return;
  }
  auto idx_opt = view_->index_of(h.sender);
  if (!idx_opt || *idx_opt == my_index_) {
    ++stats_.malformed;
    return;
  }
  auto idx = static_cast<std::uint32_t>(*idx_opt);
  if (ds_->has(idx, h.seq)) {
    ++stats_.duplicates;
    return;
  }
  Bytes payload;
  if (h.sealed) {
    if (!opener_) {
      key_pending_.try_emplace({idx, h.seq}, frame);
      return;
    }
    if (f.sealed->sender_index() != idx) {
      ++stats_.auth_failures;
      return;
    }
    auto r = opener_->open(*f.sealed, f.header_bytes);
    if (!r) {
      switch (r.code()) {
        case Errc::replay: ++stats_.replays; break;
        case Errc::stale_epoch: ++stats_.stale_epoch; break;
        default: ++stats_.auth_failures; break;
      }
      return;
    }
    payload = std::move(*r);
  } else {
    if (!h.control || !node_.verify_from(h.sender, f.signed_part, f.signature)) {
      ++stats_.bad_signatures;
      return;
    }
    payload = std::move(f.payload);
  }
  ordcast::SeqMsg m;
  m.sender = idx;
  m.seq = h.seq;
  m.ts = h.ts;
  m.mode = h.mode;
  m.control = h.control;
  m.frag_index = h.frag_index;
  m.frag_count = h.frag_count;
  m.payload = std::move(payload);
  m.wire = frame;
  ds_->accept(std::move(m));
  susp_.heard(h.sender, now());
  heard_since_install_.insert(h.sender);
  if (h.mode == Mode::agreed) schedule_eager_heartbeat();
}

void GroupSession::after_receive() {
  if (!view_ || !ds_ || state_ == SessionState::left) return;
  View current = *view_;
  dispatch(ds_->drain(), current);
  if (!ds_ || state_ == SessionState::left) return;
  ds_->gc();
  stats_.max_buffered = std::max(stats_.max_buffered, ds_->buffered());
  if (pending_ && pending_->cut_known && !pending_->done) try_finish_flush();
  pump_outbox();
}

void GroupSession::dispatch(std::vector<ordcast::Delivery> deliveries, const View& in_view) {
  for (auto& d : deliveries) {
    if (state_ == SessionState::left) return;
    if (d.control) {
      if (view_ && view_->id == in_view.id) on_control(d);
      continue;
    }
    ++stats_.delivered;
    if (!cb_.on_message) continue;
    GroupMessage msg;
    msg.group = group_;
    msg.view = in_view.id;
    msg.sender = in_view.members[d.sender];
    msg.seq = d.seq;
    msg.ts = d.ts;
    msg.mode = d.mode;
    msg.payload = std::move(d.payload);
    cb_.on_message(msg);
  }
}

void GroupSession::pump_outbox() {
  while (state_ == SessionState::member && view_ && ds_ && !pending_ && sealer_ && !outbox_.empty()) {
    if (ds_->window_full(opt_.unstable_window)) return;
    if (sealer_->exhausted()) {
      request_rekey();
      return;
    }
    Outgoing out = std::move(outbox_.front());
    outbox_.pop_front();
    send_app(out);
  }
}

void GroupSession::send_app(const Outgoing& out) {
  auto frags = ordcast::fragment(out.payload);
  for (std::size_t i = 0; i < frags.size(); ++i) {
    DataHeader h;
    h.group = group_;
    h.view = view_->id;
    h.sender = self_;
    h.seq = ds_->next_seq();
    h.ts = ds_->stamp();
    h.mode = out.mode;
    h.sealed = true;
    h.frag_index = static_cast<std::uint16_t>(i);
    h.frag_count = static_cast<std::uint16_t>(frags.size());
    auto frame = encode_sealed_data(h, *sealer_, frags[i]);
    ordcast::SeqMsg m{my_index_, h.seq, h.ts, h.mode, false, h.frag_index, h.frag_count, frags[i], frame};
    ds_->accept(std::move(m));
    broadcast(frame);
  }
  ++stats_.sent;
  stats_.max_unstable_own = std::max<std::size_t>(stats_.max_unstable_own, ds_->unstable_own());
  View current = *view_;
  dispatch(ds_->drain(), current);
}

void GroupSession::send_control(const Bytes& payload) {
  DataHeader h;
  h.group = group_;
  h.view = view_->id;
  h.sender = self_;
  h.seq = ds_->next_seq();
  h.ts = ds_->stamp();
  h.mode = Mode::fifo;
  h.control = true;
  auto frame = encode_signed_data(h, payload, me());
  ordcast::SeqMsg m{my_index_, h.seq, h.ts, h.mode, true, 0, 1, payload, frame};
  ds_->accept(std::move(m));
  broadcast(frame);
}

// ------------------------------------------------------------------- sgl

void GroupSession::start_keying() {
  auto x = algebra_->random_scalar(node_.rng());
  gdh_ = std::make_unique<sgl::GdhSession>(algebra_, group_, view_->epoch(), view_->members.size(), my_index_,
                                           std::move(x));
  if (my_index_ != 0) return;
  auto flow = gdh_->start();
  if (flow) {
    flow->sign(me().secret);
    send_control(flow->encode());
  } else {
    key_done();
  }
}

void GroupSession::on_control(const ordcast::Delivery& d) {
  if (!gdh_ || d.sender == my_index_) return;
  const auto& sender = view_->members[d.sender];
  sgl::KeyFlow flow;
  try {
    flow = sgl::KeyFlow::decode(d.payload);
  } catch (const Error&) {
    ++stats_.malformed;
    suspect(sender);
    return;
  }
  const auto* cert = node_.cert_of(sender.fingerprint);
  if (cert == nullptr || flow.sender != d.sender || !flow.verify(cert->public_key)) {
    ++stats_.bad_signatures;
    suspect(sender);
    return;
  }
  if (gdh_->done()) return;
  auto r = gdh_->on_flow(flow);
  if (!r) {
    if (r.code() == Errc::precondition) return;  // an upflow addressed to someone else
    if (cb_.on_error) cb_.on_error(r.code(), r.error().what());
    suspect(sender);
    return;
  }
  if (r->has_value()) {
    auto next = std::move(**r);
    next.sign(me().secret);
    send_control(next.encode());
  }
  if (gdh_->done() && !keys_) key_done();
}

void GroupSession::key_done() {
  keys_ = std::make_shared<const sgl::KeyMaterial>(gdh_->keys());
  sealer_ = std::make_unique<sgl::Sealer>(keys_, my_index_, opt_.counter_limit);
  opener_ = std::make_unique<sgl::Opener>(keys_);
  auto held = std::move(key_pending_);
  key_pending_.clear();
  for (const auto& [k, frame] : held) process_data(frame);
  if (cb_.on_secure) cb_.on_secure(*view_);
  if (state_ == SessionState::left) return;
  after_receive();
}

// ---------------------------------------------------------------- inbound

void GroupSession::handle_frame(const Envelope& env, const netsim::Datagram& d) {
  if (state_ == SessionState::left) return;
  try {
    switch (env.type) {
      case FrameType::heartbeat: on_heartbeat(Heartbeat::decode(env), env); break;
      case FrameType::nack: on_nack(Nack::decode(env), env); break;
      case FrameType::join_req: on_join(JoinReq::decode(env), env, d); break;
      case FrameType::view_propose: on_propose(Propose::decode(env), env); break;
      case FrameType::view_ack: on_ack(Ack::decode(env), env); break;
      case FrameType::flush_cut: on_flush_cut(FlushCut::decode(env), env); break;
      case FrameType::flush_vec: on_flush_vec(FlushVec::decode(env), env); break;
      case FrameType::view_install: on_install(Install::decode(env), env); break;
      case FrameType::leave: on_leave(Leave::decode(env), env); break;
      case FrameType::probe: on_probe(Probe::decode(env), env); break;
      default: ++stats_.malformed; break;
    }
  } catch (const Error&) {
    ++stats_.malformed;
  }
}

void GroupSession::leave_now() {
  if (state_ == SessionState::left) return;
  if (view_) {
    Leave l{group_, view_->id, self_, me().cert};
    broadcast(l.encode(me()));
  }
  state_ = SessionState::left;
  outbox_.clear();
  if (keys_) keys_.reset();
  sealer_.reset();
  opener_.reset();
  gdh_.reset();
  auto& t = node_.transport();
  if (tick_timer_) t.cancel(*tick_timer_);
  if (eager_timer_) t.cancel(*eager_timer_);
  tick_timer_.reset();
  eager_timer_.reset();
}

}  // namespace collab::group
