#include "collab/netsim/network.hpp"

#include <algorithm>
#include <cmath>

#include "collab/common/error.hpp"

namespace collab::netsim {

namespace {

enum class TraceKind : std::uint8_t { datagram = 1, timer = 2, stream_open = 3, stream_data = 4, stream_close = 5,
                                      fault = 6 };

bool groups_disjoint(const PartitionGroups& groups) {
  std::set<EndpointAddr> seen;
  for (const auto& g : groups) {
    for (const auto& a : g) {
      if (!seen.insert(a).second) return false;
    }
  }
  return true;
}

}  // namespace

std::optional<std::string> LinkPolicy::invalid_field() const {
  auto prob_ok = [](double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; };
  if (!prob_ok(loss_prob)) return "loss_prob";
  if (delay_min < 0) return "delay_min";
  if (delay_max < delay_min) return "delay_max";
  if (!prob_ok(duplicate_prob)) return "duplicate_prob";
  if (!groups_disjoint(partition)) return "partition";
  return std::nullopt;
}

std::string TraceDigest::to_string() const {
  return "events=" + std::to_string(event_count) + " t=" + std::to_string(final_time) + " hash=" + to_hex(hash);
}

// ---------------------------------------------------------------------------
// SimEndpoint

SimEndpoint::~SimEndpoint() {
  if (net_ != nullptr) net_->detach(this);
}

SimTime SimEndpoint::now() const { return net_->now(); }

void SimEndpoint::send(const EndpointAddr& dst, ByteView payload) { net_->endpoint_send(addr_, dst, payload); }

TimerId SimEndpoint::schedule(SimTime delay, std::function<void()> fn) {
  return net_->add_timer(this, delay, std::move(fn));
}

void SimEndpoint::cancel(TimerId id) { net_->cancel_timer(this, id); }

void SimEndpoint::listen(const std::string& service, StreamListener* listener) {
  if (listener == nullptr) {
    listeners_.erase(service);
  } else {
    listeners_[service] = listener;
  }
}

StreamId SimEndpoint::connect(const EndpointAddr& dst, const std::string& service, StreamListener* listener) {
  return net_->stream_connect(this, dst, service, listener);
}

void SimEndpoint::stream_send(StreamId id, ByteView message) { net_->stream_send(this, id, message); }

void SimEndpoint::stream_close(StreamId id) { net_->stream_close(this, id); }

// ---------------------------------------------------------------------------
// Network

Network::Network(std::uint64_t seed, LinkPolicy policy) : rng_(seed), policy_(std::move(policy)) {
  if (auto bad = policy_.invalid_field()) throw Error(Errc::invalid_policy, "invalid link policy field: " + *bad);
  Writer w;
  w.u64(seed);
  trace_.update(w.bytes());
}

Network::~Network() {
  for (auto& [addr, rec] : endpoints_) rec.endpoint->net_ = nullptr;
}

double Network::unit_from(std::uint64_t draw) { return static_cast<double>(draw >> 11) * 0x1.0p-53; }

SimTime Network::draw_delay() {
  auto span = static_cast<std::uint64_t>(policy_.delay_max - policy_.delay_min) + 1;
  return policy_.delay_min + static_cast<SimTime>(draw() % span);
}

bool Network::same_side(const EndpointAddr& a, const EndpointAddr& b) const {
  if (policy_.partition.empty()) return true;
  auto group_of = [&](const EndpointAddr& x) -> int {
    for (std::size_t i = 0; i < policy_.partition.size(); ++i) {
      if (policy_.partition[i].count(x) != 0) return static_cast<int>(i);
    }
    return -1;
  };
  return group_of(a) == group_of(b);
}

std::unique_ptr<SimEndpoint> Network::attach(const EndpointAddr& addr) {
  if (endpoints_.count(addr) != 0) throw Error(Errc::duplicate_addr, "address already attached: " + addr.to_string());
  std::unique_ptr<SimEndpoint> ep(new SimEndpoint(this, addr));
  endpoints_[addr] = AttachRecord{ep.get(), now_};
  return ep;
}

void Network::detach(SimEndpoint* ep) {
  for (auto id : ep->timers_) timers_.erase(id);
  ep->timers_.clear();
  std::vector<StreamId> doomed;
  for (auto& [id, s] : streams_) {
    if (!s.dead && (s.initiator == ep->addr_ || s.acceptor == ep->addr_)) doomed.push_back(id);
  }
  for (auto id : doomed) reset_stream(id, "reset");
  // The endpoint is gone: make sure the reset is not delivered back to it.
  for (auto& [id, s] : streams_) {
    if (s.initiator == ep->addr_) s.initiator_listener = nullptr;
    if (s.acceptor == ep->addr_) s.acceptor_listener = nullptr;
  }
  endpoints_.erase(ep->addr_);
}

void Network::push(SimTime time, Payload payload) { queue_.push(Event{time, next_seq_++, std::move(payload)}); }

void Network::endpoint_send(const EndpointAddr& src, const EndpointAddr& dst, ByteView payload) {
  if (payload.size() > kMaxDatagram) {
    throw Error(Errc::oversize, "datagram of " + std::to_string(payload.size()) + " bytes exceeds 8 KiB");
  }
  ++stats_.datagrams_sent;
  if (src.node_id != dst.node_id) ++stats_.external_datagrams;
  Datagram dg{src, dst, Bytes(payload.begin(), payload.end()), now_};
  if (src == dst) {
    push(now_ + policy_.delay_min, DeliverDatagram{std::move(dg)});
    return;
  }
  if (!same_side(src, dst)) {
    ++stats_.datagrams_partitioned;
    return;
  }
  if (draw_unit() < policy_.loss_prob) {
    ++stats_.datagrams_lost;
    return;
  }
  SimTime at = now_ + draw_delay();
  if (!policy_.reorder) {
    auto& tail = link_tail_[{src, dst}];
    at = std::max(at, tail);
    tail = at;
  }
  bool dup = draw_unit() < policy_.duplicate_prob;
  if (dup) {
    ++stats_.duplicates;
    SimTime dup_at = now_ + draw_delay();
    if (!policy_.reorder) {
      auto& tail = link_tail_[{src, dst}];
      dup_at = std::max(dup_at, tail);
      tail = dup_at;
    }
    push(dup_at, DeliverDatagram{dg});
  }
  push(at, DeliverDatagram{std::move(dg)});
}

TimerId Network::add_timer(SimEndpoint* ep, SimTime delay, std::function<void()> fn) {
  TimerId id = next_timer_++;
  timers_[id] = std::move(fn);
  ep->timers_.insert(id);
  push(now_ + std::max<SimTime>(delay, 0), TimerFire{id, ep->addr_});
  return id;
}

void Network::cancel_timer(SimEndpoint* ep, TimerId id) {
  timers_.erase(id);
  ep->timers_.erase(id);
}

StreamId Network::stream_connect(SimEndpoint* ep, const EndpointAddr& dst, const std::string& service,
                                 StreamListener* listener) {
  StreamId id = next_stream_++;
  StreamState s;
  s.initiator = ep->addr_;
  s.acceptor = dst;
  s.service = service;
  s.initiator_listener = listener;
  SimTime at = now_ + draw_delay();
  s.last_to_acceptor = at;
  streams_[id] = std::move(s);
  ++stats_.streams_opened;
  push(at, StreamOpen{id});
  return id;
}

void Network::stream_send(SimEndpoint* ep, StreamId id, ByteView message) {
  auto it = streams_.find(id);
  if (it == streams_.end() || it->second.dead) return;
  auto& s = it->second;
  bool from_initiator = s.initiator == ep->addr_;
  if (from_initiator ? s.initiator_closed : s.acceptor_closed) return;
  if (!same_side(s.initiator, s.acceptor)) {
    reset_stream(id, "reset");
    return;
  }
  ++stats_.stream_messages;
  stats_.stream_bytes += message.size();
  stats_.stream_bytes_by_service[s.service] += message.size();
  if (s.initiator.node_id != s.acceptor.node_id) stats_.external_stream_bytes += message.size();
  auto& tail = from_initiator ? s.last_to_acceptor : s.last_to_initiator;
  SimTime at = std::max(now_ + draw_delay(), tail);
  tail = at;
  push(at, StreamDeliver{id, from_initiator, Bytes(message.begin(), message.end())});
}

void Network::stream_close(SimEndpoint* ep, StreamId id) {
  auto it = streams_.find(id);
  if (it == streams_.end() || it->second.dead) return;
  auto& s = it->second;
  bool from_initiator = s.initiator == ep->addr_;
  auto& closed = from_initiator ? s.initiator_closed : s.acceptor_closed;
  if (closed) return;
  closed = true;
  auto& tail = from_initiator ? s.last_to_acceptor : s.last_to_initiator;
  SimTime at = std::max(now_ + policy_.delay_min, tail);
  tail = at;
  push(at, StreamClosed{id, from_initiator, "closed"});
}

void Network::reset_stream(StreamId id, const std::string& reason) {
  auto it = streams_.find(id);
  if (it == streams_.end() || it->second.dead) return;
  auto& s = it->second;
  s.dead = true;
  if (!s.initiator_closed) push(now_, StreamClosed{id, false, reason});
  if (s.accepted && !s.acceptor_closed) push(now_, StreamClosed{id, true, reason});
}

void Network::kill_stream(StreamId id) { reset_stream(id, "reset"); }

std::vector<StreamId> Network::open_streams(std::string_view service) const {
  std::vector<StreamId> out;
  for (const auto& [id, s] : streams_) {
    if (s.dead || (s.initiator_closed && s.acceptor_closed)) continue;
    if (!service.empty() && s.service != service) continue;
    out.push_back(id);
  }
  return out;
}

void Network::apply_fault(const Fault& fault) {
  switch (fault.kind) {
    case Fault::Kind::partition:
      if (!groups_disjoint(fault.groups)) throw Error(Errc::invalid_policy, "partition groups overlap");
      policy_.partition = fault.groups;
      break;
    case Fault::Kind::heal:
      policy_.partition.clear();
      break;
    case Fault::Kind::set_loss:
      if (!(fault.loss >= 0.0 && fault.loss <= 1.0)) throw Error(Errc::invalid_policy, "loss_prob out of range");
      policy_.loss_prob = fault.loss;
      break;
  }
}

void Network::schedule_fault(SimTime at, Fault fault) {
  if (fault.kind == Fault::Kind::partition && !groups_disjoint(fault.groups)) {
    throw Error(Errc::invalid_policy, "partition groups overlap");
  }
  push(std::max(at, now_), FaultFire{std::move(fault)});
}

crypto::Digest Network::running_hash() const {
  auto copy = trace_;
  return copy.finish();
}

void Network::record(const Event& ev) {
  Writer w;
  w.u64(static_cast<std::uint64_t>(ev.time));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DeliverDatagram>) {
          w.u8(static_cast<std::uint8_t>(TraceKind::datagram));
          p.dg.src.encode(w);
          p.dg.dst.encode(w);
          w.u64(static_cast<std::uint64_t>(p.dg.send_time));
          w.raw(crypto::sha256(p.dg.payload));
        } else if constexpr (std::is_same_v<T, TimerFire>) {
          w.u8(static_cast<std::uint8_t>(TraceKind::timer));
          p.owner.encode(w);
        } else if constexpr (std::is_same_v<T, StreamOpen>) {
          w.u8(static_cast<std::uint8_t>(TraceKind::stream_open));
          w.u64(p.id);
        } else if constexpr (std::is_same_v<T, StreamDeliver>) {
          w.u8(static_cast<std::uint8_t>(TraceKind::stream_data));
          w.u64(p.id);
          w.u8(p.to_acceptor ? 1 : 0);
          w.raw(crypto::sha256(p.message));
        } else if constexpr (std::is_same_v<T, StreamClosed>) {
          w.u8(static_cast<std::uint8_t>(TraceKind::stream_close));
          w.u64(p.id);
          w.u8(p.to_acceptor ? 1 : 0);
        } else {
          w.u8(static_cast<std::uint8_t>(TraceKind::fault));
          w.u8(static_cast<std::uint8_t>(p.fault.kind));
        }
      },
      ev.payload);
  trace_.update(w.bytes());
  ++event_count_;
  last_event_time_ = ev.time;
}

void Network::dispatch(Event& ev) {
  if (auto* d = std::get_if<DeliverDatagram>(&ev.payload)) {
    auto it = endpoints_.find(d->dg.dst);
    if (it == endpoints_.end() || d->dg.send_time < it->second.attached_at) return;
    record(ev);
    ++stats_.datagrams_delivered;
    if (tap_) tap_(d->dg);
    auto* ep = it->second.endpoint;
    if (ep->receiver_) ep->receiver_(d->dg);
  } else if (auto* t = std::get_if<TimerFire>(&ev.payload)) {
    auto it = timers_.find(t->id);
    if (it == timers_.end()) return;
    record(ev);
    auto fn = std::move(it->second);
    timers_.erase(it);
    auto ep = endpoints_.find(t->owner);
    if (ep != endpoints_.end()) ep->second.endpoint->timers_.erase(t->id);
    fn();
  } else if (auto* o = std::get_if<StreamOpen>(&ev.payload)) {
    auto sit = streams_.find(o->id);
    if (sit == streams_.end() || sit->second.dead) return;
    auto& s = sit->second;
    record(ev);
    auto eit = endpoints_.find(s.acceptor);
    StreamListener* listener = nullptr;
    if (eit != endpoints_.end() && same_side(s.initiator, s.acceptor)) {
      auto lit = eit->second.endpoint->listeners_.find(s.service);
      if (lit != eit->second.endpoint->listeners_.end()) listener = lit->second;
    }
    if (listener == nullptr) {
      reset_stream(o->id, "connect");
      return;
    }
    s.accepted = true;
    s.acceptor_listener = listener;
    listener->on_stream_open(o->id, s.initiator, s.service);
  } else if (auto* m = std::get_if<StreamDeliver>(&ev.payload)) {
    auto sit = streams_.find(m->id);
    if (sit == streams_.end() || sit->second.dead) return;
    auto& s = sit->second;
    record(ev);
    auto* listener = m->to_acceptor ? s.acceptor_listener : s.initiator_listener;
    if (listener != nullptr) listener->on_stream_message(m->id, std::move(m->message));
  } else if (auto* c = std::get_if<StreamClosed>(&ev.payload)) {
    auto sit = streams_.find(c->id);
    if (sit == streams_.end()) return;
    auto& s = sit->second;
    record(ev);
    auto* listener = c->to_acceptor ? s.acceptor_listener : s.initiator_listener;
    if (c->to_acceptor) {
      s.acceptor_listener = nullptr;
      s.acceptor_closed = true;
    } else {
      s.initiator_listener = nullptr;
      s.initiator_closed = true;
    }
    if (s.initiator_closed && (s.acceptor_closed || !s.accepted)) s.dead = true;
    if (listener != nullptr) listener->on_stream_closed(c->id, c->reason);
    if (s.dead && s.initiator_listener == nullptr && s.acceptor_listener == nullptr) streams_.erase(sit);
  } else if (auto* f = std::get_if<FaultFire>(&ev.payload)) {
    record(ev);
    apply_fault(f->fault);
  }
}

TraceDigest Network::run_until(SimTime limit) {
  while (!queue_.empty() && queue_.top().time <= limit) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    dispatch(ev);
  }
  now_ = std::max(now_, limit);
  return digest();
}

TraceDigest Network::run_until_quiescent(SimTime cap) {
  while (!queue_.empty() && queue_.top().time <= cap) {
    Event ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    dispatch(ev);
  }
  return digest();
}

}  // namespace collab::netsim
