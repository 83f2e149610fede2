#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "collab/common/error.hpp"
#include "collab/netsim/network.hpp"
#include "collab/netsim/scenario.hpp"

using namespace collab;
using namespace collab::netsim;

namespace {

struct Inbox {
  std::vector<Datagram> got;
  void attach(Transport& t) {
    t.set_receiver([this](const Datagram& d) { got.push_back(d); });
  }
};

LinkPolicy fixed_delay(SimTime d, double loss = 0.0) {
  LinkPolicy p;
  p.delay_min = p.delay_max = d;
  p.loss_prob = loss;
  return p;
}

// Replays the per-send draw order of Network::endpoint_send (loss, delay,
// duplicate) with an independent generator and counts survivors.
std::size_t replay_delivered(std::uint64_t seed, double loss, std::size_t sends) {
  std::mt19937_64 rng(seed);
  std::size_t delivered = 0;
  for (std::size_t i = 0; i < sends; ++i) {
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u < loss) continue;
    rng();  // delay
    rng();  // duplicate
    ++delivered;
  }
  return delivered;
}

}  // namespace

TEST(Network, CreateIsEmpty) {
  Network net(7, fixed_delay(1));
  EXPECT_EQ(net.endpoint_count(), 0u);
  auto d = net.run_until_quiescent();
  EXPECT_EQ(d.event_count, 0u);
  EXPECT_EQ(d.final_time, 0);
}

TEST(Network, InvalidPolicyNamesField) {
  LinkPolicy p;
  p.loss_prob = 1.5;
  try {
    Network net(1, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_policy);
    EXPECT_NE(std::string(e.what()).find("loss_prob"), std::string::npos);
  }
  p = LinkPolicy{};
  p.delay_min = 5;
  p.delay_max = 2;
  EXPECT_EQ(p.invalid_field(), std::optional<std::string>("delay_max"));
  p = LinkPolicy{};
  p.partition = {{EndpointAddr::sim(1)}, {EndpointAddr::sim(1), EndpointAddr::sim(2)}};
  EXPECT_EQ(p.invalid_field(), std::optional<std::string>("partition"));
}

TEST(Network, DuplicateAttachRejected) {
  Network net(7, fixed_delay(1));
  auto a = net.attach(EndpointAddr::sim(1));
  try {
    auto again = net.attach(EndpointAddr::sim(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::duplicate_addr);
  }
}

TEST(Network, LoopbackDeliveredAfterDelay) {
  Network net(7, fixed_delay(5));
  auto a = net.attach(EndpointAddr::sim(1));
  Inbox in;
  in.attach(*a);
  a->send(a->local_addr(), to_bytes("self"));
  auto d = net.run_until_quiescent();
  ASSERT_EQ(in.got.size(), 1u);
  EXPECT_EQ(d.final_time, 5);
  EXPECT_EQ(d.event_count, 1u);
}

TEST(Network, HundredEndpointsAllAddressable) {
  Network net(3, fixed_delay(2));
  std::vector<std::unique_ptr<SimEndpoint>> eps;
  std::vector<Inbox> inboxes(100);
  for (std::uint32_t i = 0; i < 100; ++i) {
    eps.push_back(net.attach(EndpointAddr::sim(i)));
    inboxes[i].attach(*eps.back());
  }
  for (std::uint32_t i = 1; i < 100; ++i) eps[0]->send(EndpointAddr::sim(i), to_bytes("ping"));
  net.run_until_quiescent();
  for (std::uint32_t i = 1; i < 100; ++i) {
    ASSERT_EQ(inboxes[i].got.size(), 1u) << i;
    EXPECT_EQ(inboxes[i].got[0].src, EndpointAddr::sim(0));
  }
}

TEST(Network, CertainLossNeverDelivers) {
  Network net(7, fixed_delay(1, 1.0));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  Inbox in;
  in.attach(*b);
  for (int i = 0; i < 100; ++i) a->send(b->local_addr(), to_bytes("x"));
  net.run_until_quiescent();
  EXPECT_TRUE(in.got.empty());
  EXPECT_EQ(net.stats().datagrams_lost, 100u);
}

TEST(Network, DegenerateDelayIsExact) {
  Network net(7, fixed_delay(5));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  std::vector<SimTime> at;
  b->set_receiver([&](const Datagram&) { at.push_back(net.now()); });
  net.run_until(10);
  a->send(b->local_addr(), to_bytes("x"));
  net.run_until_quiescent();
  ASSERT_EQ(at.size(), 1u);
  EXPECT_EQ(at[0], 15);
}

TEST(Network, OversizeRejected) {
  Network net(7, fixed_delay(1));
  auto a = net.attach(EndpointAddr::sim(1));
  Bytes big(kMaxDatagram + 1);
  try {
    a->send(EndpointAddr::sim(2), big);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::oversize);
  }
  EXPECT_NO_THROW(a->send(EndpointAddr::sim(2), Bytes(kMaxDatagram)));
}

TEST(Network, NothingSentBeforeAttachIsReceived) {
  Network net(7, fixed_delay(10));
  auto a = net.attach(EndpointAddr::sim(1));
  a->send(EndpointAddr::sim(2), to_bytes("early"));
  net.run_until(3);
  auto b = net.attach(EndpointAddr::sim(2));
  Inbox in;
  in.attach(*b);
  net.run_until_quiescent();
  EXPECT_TRUE(in.got.empty());
}

TEST(Network, PartitionDropsThenHealDelivers) {
  Network net(7, fixed_delay(1));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  Inbox in;
  in.attach(*b);
  net.apply_fault(Fault::partition_of({{a->local_addr()}, {b->local_addr()}}));
  a->send(b->local_addr(), to_bytes("blocked"));
  net.run_until_quiescent();
  EXPECT_TRUE(in.got.empty());
  net.apply_fault(Fault::heal());
  a->send(b->local_addr(), to_bytes("open"));
  net.run_until_quiescent();
  ASSERT_EQ(in.got.size(), 1u);
  EXPECT_EQ(to_string(in.got[0].payload), "open");
}

TEST(Network, HealOnUnpartitionedIsNoop) {
  Network net(7, fixed_delay(1));
  net.apply_fault(Fault::heal());
  EXPECT_TRUE(net.policy().partition.empty());
}

TEST(Network, OverlappingPartitionRejected) {
  Network net(7, fixed_delay(1));
  auto x = EndpointAddr::sim(1);
  try {
    net.apply_fault(Fault::partition_of({{x}, {x}}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_policy);
  }
}

TEST(Network, InFlightUnaffectedByLaterPartition) {
  Network net(7, fixed_delay(10));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  Inbox in;
  in.attach(*b);
  a->send(b->local_addr(), to_bytes("in flight"));
  net.run_until(2);
  net.apply_fault(Fault::partition_of({{a->local_addr()}, {b->local_addr()}}));
  net.run_until_quiescent();
  EXPECT_EQ(in.got.size(), 1u);
}

TEST(Network, TenPercentLossMatchesBinomialAndReplay) {
  constexpr std::size_t kSends = 10'000;
  Network net(7, fixed_delay(1, 0.1));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  Inbox in;
  in.attach(*b);
  for (std::size_t i = 0; i < kSends; ++i) a->send(b->local_addr(), to_bytes("m"));
  net.run_until_quiescent();
  double sigma = std::sqrt(kSends * 0.1 * 0.9);
  EXPECT_LE(std::abs(static_cast<double>(in.got.size()) - 9000.0), 3 * sigma);
  EXPECT_EQ(in.got.size(), replay_delivered(7, 0.1, kSends));
}

TEST(Network, SetLossFaultMatchesReplay) {
  Network net(11, fixed_delay(1));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  Inbox in;
  in.attach(*b);
  net.apply_fault(Fault::set_loss(0.5));
  for (int i = 0; i < 1000; ++i) a->send(b->local_addr(), to_bytes("m"));
  net.run_until_quiescent();
  EXPECT_EQ(in.got.size(), replay_delivered(11, 0.5, 1000));
}

TEST(Network, DelayBoundsAndNoFabrication) {
  std::mt19937_64 meta(99);
  for (int round = 0; round < 20; ++round) {
    LinkPolicy p;
    p.delay_min = static_cast<SimTime>(meta() % 20);
    p.delay_max = p.delay_min + static_cast<SimTime>(meta() % 50);
    p.loss_prob = 0.2;
    p.duplicate_prob = 0.1;
    p.reorder = (round % 2) == 0;
    Network net(meta(), p);
    auto a = net.attach(EndpointAddr::sim(1));
    auto b = net.attach(EndpointAddr::sim(2));
    std::set<Bytes> sent;
    bool ok = true;
    b->set_receiver([&](const Datagram& d) {
      SimTime t = net.now();
      ok = ok && t >= d.send_time + p.delay_min && t <= d.send_time + p.delay_max;
      ok = ok && sent.count(d.payload) == 1 && d.src == a->local_addr();
    });
    for (int i = 0; i < 200; ++i) {
      Bytes payload = to_bytes("msg-" + std::to_string(i));
      sent.insert(payload);
      a->send(b->local_addr(), payload);
      net.run_for(static_cast<SimTime>(meta() % 5));
    }
    net.run_until_quiescent();
    EXPECT_TRUE(ok) << "round " << round;
  }
}

TEST(Network, NoReorderKeepsLinkFifo) {
  LinkPolicy p;
  p.delay_min = 1;
  p.delay_max = 40;
  p.reorder = false;
  Network net(5, p);
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  std::vector<int> order;
  b->set_receiver([&](const Datagram& d) { order.push_back(std::stoi(to_string(d.payload))); });
  for (int i = 0; i < 100; ++i) a->send(b->local_addr(), to_bytes(std::to_string(i)));
  net.run_until_quiescent();
  ASSERT_EQ(order.size(), 100u);
  EXPECT_TRUE(std::is_sorted(order.begin(), order.end()));
}

namespace {

TraceDigest run_scripted(std::uint64_t seed) {
  LinkPolicy p;
  p.delay_min = 1;
  p.delay_max = 30;
  p.loss_prob = 0.3;
  p.duplicate_prob = 0.05;
  Network net(seed, p);
  std::vector<std::unique_ptr<SimEndpoint>> eps;
  for (std::uint32_t i = 0; i < 4; ++i) eps.push_back(net.attach(EndpointAddr::sim(i)));
  for (auto& e : eps) {
    auto* self = e.get();
    e->set_receiver([self](const Datagram& d) {
      if (d.payload.size() < 6) {
        Bytes reply = d.payload;
        reply.push_back('!');
        self->send(d.src, reply);
      }
    });
  }
  net.schedule_fault(50, Fault::partition_of({{EndpointAddr::sim(0), EndpointAddr::sim(1)}}));
  net.schedule_fault(120, Fault::heal());
  for (int i = 0; i < 50; ++i) {
    eps[i % 4]->send(EndpointAddr::sim((i + 1) % 4), to_bytes("p"));
    eps[i % 4]->schedule(i * 3, [] {});
    net.run_for(4);
  }
  return net.run_until_quiescent();
}

}  // namespace

TEST(Network, ReplayWithSameSeedGivesSameDigest) {
  auto first = run_scripted(42);
  auto second = run_scripted(42);
  EXPECT_EQ(first, second);
  EXPECT_GT(first.event_count, 0u);
  EXPECT_NE(first.hash, run_scripted(43).hash);
}

TEST(Network, DigestFormat) {
  Network net(7, fixed_delay(5));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  a->send(b->local_addr(), to_bytes("x"));
  auto d = net.run_until_quiescent();
  EXPECT_EQ(d.final_time, 5);
  auto text = d.to_string();
  EXPECT_EQ(text.rfind("events=1 t=5 hash=", 0), 0u);
  EXPECT_EQ(text.size(), std::string("events=1 t=5 hash=").size() + 64);
}

TEST(Network, TimersFireInOrderAndDieWithEndpoint) {
  Network net(7, fixed_delay(1));
  auto a = net.attach(EndpointAddr::sim(1));
  std::vector<int> fired;
  a->schedule(10, [&] { fired.push_back(2); });
  a->schedule(5, [&] { fired.push_back(1); });
  auto dead = a->schedule(7, [&] { fired.push_back(99); });
  a->cancel(dead);
  net.run_until(20);
  EXPECT_EQ(fired, (std::vector<int>{1, 2}));
  a->schedule(5, [&] { fired.push_back(3); });
  a.reset();
  net.run_until_quiescent();
  EXPECT_EQ(fired.size(), 2u);
}

namespace {

struct Recorder : StreamListener {
  std::vector<std::string> messages;
  std::vector<std::string> closes;
  std::vector<StreamId> opened;
  Transport* reply_via = nullptr;
  void on_stream_open(StreamId id, const EndpointAddr&, const std::string&) override { opened.push_back(id); }
  void on_stream_message(StreamId id, Bytes m) override {
    messages.push_back(to_string(m));
    if (reply_via != nullptr) reply_via->stream_send(id, to_bytes("re:" + messages.back()));
  }
  void on_stream_closed(StreamId, std::string_view reason) override { closes.emplace_back(reason); }
};

}  // namespace

TEST(Network, StreamsAreReliableAndOrdered) {
  LinkPolicy p;
  p.delay_min = 1;
  p.delay_max = 50;
  p.loss_prob = 0.5;  // datagram-only; streams are reliable
  Network net(8, p);
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  Recorder server, client;
  server.reply_via = b.get();
  b->listen("item", &server);
  auto id = a->connect(b->local_addr(), "item", &client);
  for (int i = 0; i < 20; ++i) a->stream_send(id, to_bytes(std::to_string(i)));
  net.run_until_quiescent();
  ASSERT_EQ(server.messages.size(), 20u);
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(server.messages[i], std::to_string(i));
    EXPECT_EQ(client.messages[i], "re:" + std::to_string(i));
  }
  EXPECT_EQ(net.stats().stream_bytes_by_service.at("item"), net.stats().stream_bytes);
}

TEST(Network, StreamConnectFailsWithoutListener) {
  Network net(8, fixed_delay(2));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  Recorder client;
  a->connect(b->local_addr(), "nothing", &client);
  net.run_until_quiescent();
  ASSERT_EQ(client.closes.size(), 1u);
  EXPECT_EQ(client.closes[0], "connect");
}

TEST(Network, KilledStreamResetsBothEnds) {
  Network net(8, fixed_delay(2));
  auto a = net.attach(EndpointAddr::sim(1));
  auto b = net.attach(EndpointAddr::sim(2));
  Recorder server, client;
  b->listen("item", &server);
  auto id = a->connect(b->local_addr(), "item", &client);
  a->stream_send(id, to_bytes("one"));
  net.run_until_quiescent();
  a->stream_send(id, to_bytes("two"));
  net.kill_stream(id);
  net.run_until_quiescent();
  EXPECT_EQ(server.messages, std::vector<std::string>{"one"});
  EXPECT_EQ(server.closes, std::vector<std::string>{"reset"});
  EXPECT_EQ(client.closes, std::vector<std::string>{"reset"});
  EXPECT_TRUE(net.open_streams().empty());
}

TEST(Scenario, ParsesPolicyAndFaults) {
  auto doc = nlohmann::json::parse(R"({
    "seed": 9,
    "policy": {"loss_prob": 0.25, "delay_min_ms": 2, "delay_max_ms": 8, "duplicate_prob": 0.0},
    "faults": [{"at_ms": 100, "kind": "partition", "args": {"groups": [[0, 1], [2]]}},
               {"at_ms": 200, "kind": "heal"},
               {"at_ms": 300, "kind": "set_loss", "args": {"p": 0.5}}]
  })");
  auto s = Scenario::from_json(doc);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_DOUBLE_EQ(s.policy.loss_prob, 0.25);
  EXPECT_EQ(s.policy.delay_max, 8);
  ASSERT_EQ(s.faults.size(), 3u);
  EXPECT_EQ(s.faults[0].fault.groups.size(), 2u);
  auto net = s.make_network();
  net->run_until(250);
  EXPECT_TRUE(net->policy().partition.empty());
  net->run_until(350);
  EXPECT_DOUBLE_EQ(net->policy().loss_prob, 0.5);
}

TEST(Scenario, RejectsBadPolicy) {
  auto doc = nlohmann::json::parse(R"({"seed": 1, "policy": {"loss_prob": 2.0}})");
  EXPECT_THROW(Scenario::from_json(doc), Error);
}

TEST(EndpointAddr, ParseRoundTrip) {
  auto a = EndpointAddr::parse("10.1.2.3:4000");
  EXPECT_TRUE(a.is_ipv4_mapped());
  EXPECT_EQ(a.to_string(), "10.1.2.3:4000");
  auto s = EndpointAddr::sim(77, 9);
  EXPECT_EQ(EndpointAddr::parse(s.to_string()), s);
  EXPECT_THROW(EndpointAddr::parse("nope"), Error);
  EXPECT_LT(EndpointAddr::sim(1), EndpointAddr::sim(2));
}
