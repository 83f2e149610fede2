#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "collab/crypto/crypto.hpp"
#include "collab/netsim/transport.hpp"

namespace collab::netsim {

using PartitionGroups = std::vector<std::set<EndpointAddr>>;

struct LinkPolicy {
  double loss_prob = 0.0;
  SimTime delay_min = 1;
  SimTime delay_max = 1;
  double duplicate_prob = 0.0;
  // When false, each (src,dst) link delivers in send order.
  bool reorder = true;
  // Disjoint groups; endpoints not listed share one implicit group.
  PartitionGroups partition;

  // Name of the first invalid field, if any.
  std::optional<std::string> invalid_field() const;
};

struct Fault {
  enum class Kind { partition, heal, set_loss };
  Kind kind = Kind::heal;
  PartitionGroups groups;
  double loss = 0.0;

  static Fault partition_of(PartitionGroups groups) { return {Kind::partition, std::move(groups), 0.0}; }
  static Fault heal() { return {Kind::heal, {}, 0.0}; }
  static Fault set_loss(double p) { return {Kind::set_loss, {}, p}; }
};

struct TraceDigest {
  std::uint64_t event_count = 0;
  SimTime final_time = 0;
  crypto::Digest hash{};

  // "events=<n> t=<ms> hash=<hex>"
  std::string to_string() const;
  bool operator==(const TraceDigest&) const = default;
};

struct NetStats {
  std::uint64_t datagrams_sent = 0;
  std::uint64_t datagrams_delivered = 0;
  std::uint64_t datagrams_lost = 0;
  std::uint64_t datagrams_partitioned = 0;
  std::uint64_t duplicates = 0;
  // Sends whose destination is on a different node than the source.
  std::uint64_t external_datagrams = 0;
  std::uint64_t streams_opened = 0;
  std::uint64_t stream_messages = 0;
  std::uint64_t stream_bytes = 0;
  std::uint64_t external_stream_bytes = 0;
  std::map<std::string, std::uint64_t> stream_bytes_by_service;
};

class Network;

// An attached address. Detaches on destruction; pending timers die with it.
class SimEndpoint final : public Transport {
 public:
  ~SimEndpoint() override;
  SimEndpoint(const SimEndpoint&) = delete;
  SimEndpoint& operator=(const SimEndpoint&) = delete;

  const EndpointAddr& local_addr() const override { return addr_; }
  SimTime now() const override;
  void send(const EndpointAddr& dst, ByteView payload) override;
  void set_receiver(std::function<void(const Datagram&)> handler) override { receiver_ = std::move(handler); }
  TimerId schedule(SimTime delay, std::function<void()> fn) override;
  void cancel(TimerId id) override;
  void listen(const std::string& service, StreamListener* listener) override;
  StreamId connect(const EndpointAddr& dst, const std::string& service, StreamListener* listener) override;
  void stream_send(StreamId id, ByteView message) override;
  void stream_close(StreamId id) override;

 private:
  friend class Network;
  SimEndpoint(Network* net, EndpointAddr addr) : net_(net), addr_(addr) {}

  Network* net_;
  EndpointAddr addr_;
  std::function<void(const Datagram&)> receiver_;
  std::map<std::string, StreamListener*> listeners_;
  std::set<TimerId> timers_;
};

// Deterministic discrete-event network. One instance is single-threaded; all
// randomness is drawn from one generator seeded at construction.
class Network {
 public:
  Network(std::uint64_t seed, LinkPolicy policy);
  ~Network();
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  std::unique_ptr<SimEndpoint> attach(const EndpointAddr& addr);
  std::size_t endpoint_count() const { return endpoints_.size(); }
  bool attached(const EndpointAddr& addr) const { return endpoints_.count(addr) != 0; }

  SimTime now() const { return now_; }

  // Processes every event with time <= limit, then advances the clock to limit.
  TraceDigest run_until(SimTime limit);
  TraceDigest run_for(SimTime duration) { return run_until(now_ + duration); }
  // Runs until the queue is empty or the next event lies beyond cap.
  TraceDigest run_until_quiescent(SimTime cap = INT64_MAX);
  TraceDigest digest() const { return {event_count_, last_event_time_, running_hash()}; }

  void apply_fault(const Fault& fault);
  void schedule_fault(SimTime at, Fault fault);

  // Resets both ends of a stream, discarding anything in flight.
  void kill_stream(StreamId id);
  std::vector<StreamId> open_streams(std::string_view service = {}) const;

  const LinkPolicy& policy() const { return policy_; }
  const NetStats& stats() const { return stats_; }

  // Observes every datagram at delivery time.
  void set_tap(std::function<void(const Datagram&)> tap) { tap_ = std::move(tap); }

  // Raw draws from the run's generator, exposed so that oracles can replay it.
  static double unit_from(std::uint64_t draw);

 private:
  friend class SimEndpoint;

  struct DeliverDatagram {
    Datagram dg;
  };
  struct TimerFire {
    TimerId id;
    EndpointAddr owner;
  };
  struct StreamOpen {
    StreamId id;
  };
  struct StreamDeliver {
    StreamId id;
    bool to_acceptor;
    Bytes message;
  };
  struct StreamClosed {
    StreamId id;
    bool to_acceptor;
    std::string reason;
  };
  struct FaultFire {
    Fault fault;
  };
  using Payload = std::variant<DeliverDatagram, TimerFire, StreamOpen, StreamDeliver, StreamClosed, FaultFire>;

  struct Event {
    SimTime time;
    std::uint64_t seq;
    Payload payload;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  struct StreamState {
    EndpointAddr initiator;
    EndpointAddr acceptor;
    std::string service;
    StreamListener* initiator_listener = nullptr;
    StreamListener* acceptor_listener = nullptr;
    bool accepted = false;
    bool initiator_closed = false;
    bool acceptor_closed = false;
    bool dead = false;
    SimTime last_to_acceptor = 0;
    SimTime last_to_initiator = 0;
  };

  struct AttachRecord {
    SimEndpoint* endpoint;
    SimTime attached_at;
  };

  void push(SimTime time, Payload payload);
  void dispatch(Event& ev);
  void record(const Event& ev);
  crypto::Digest running_hash() const;

  std::uint64_t draw() { return rng_(); }
  double draw_unit() { return unit_from(draw()); }
  SimTime draw_delay();
  bool same_side(const EndpointAddr& a, const EndpointAddr& b) const;

  void endpoint_send(const EndpointAddr& src, const EndpointAddr& dst, ByteView payload);
  void detach(SimEndpoint* ep);
  TimerId add_timer(SimEndpoint* ep, SimTime delay, std::function<void()> fn);
  void cancel_timer(SimEndpoint* ep, TimerId id);
  StreamId stream_connect(SimEndpoint* ep, const EndpointAddr& dst, const std::string& service,
                          StreamListener* listener);
  void stream_send(SimEndpoint* ep, StreamId id, ByteView message);
  void stream_close(SimEndpoint* ep, StreamId id);
  void reset_stream(StreamId id, const std::string& reason);

  std::mt19937_64 rng_;
  LinkPolicy policy_;
  SimTime now_ = 0;
  SimTime last_event_time_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t event_count_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::map<EndpointAddr, AttachRecord> endpoints_;
  std::map<std::pair<EndpointAddr, EndpointAddr>, SimTime> link_tail_;
  std::unordered_map<TimerId, std::function<void()>> timers_;
  TimerId next_timer_ = 1;
  std::map<StreamId, StreamState> streams_;
  StreamId next_stream_ = 1;
  NetStats stats_;
  std::function<void(const Datagram&)> tap_;
  crypto::Sha256 trace_;
};

}  // namespace collab::netsim
