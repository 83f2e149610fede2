#include <gtest/gtest.h>

#include "collab/common/error.hpp"
#include "collab/membership/suspicion.hpp"
#include "collab/netsim/network.hpp"

using namespace collab;
using namespace collab::membership;

namespace {

ProcessId pid(std::uint8_t b, std::uint16_t port = 1) {
  ProcessId p;
  p.fingerprint.fill(b);
  p.addr = netsim::EndpointAddr::sim(b, port);
  return p;
}

View view_of(std::vector<ProcessId> members, std::uint64_t epoch = 1) {
  View v;
  v.group = "cms";
  v.members = sorted_unique(std::move(members));
  v.id = {epoch, v.members.front()};
  return v;
}

}  // namespace

TEST(ProcessIdOrder, FingerprintThenAddress) {
  EXPECT_LT(pid(1), pid(2));
  EXPECT_LT(pid(1, 1), pid(1, 2));
  Writer w;
  pid(9, 4).encode(w);
  EXPECT_EQ(w.size(), 50u);
  Reader r(w.bytes());
  EXPECT_EQ(ProcessId::decode(r), pid(9, 4));
}

TEST(ViewCodec, RoundTripAndValidation) {
  auto v = view_of({pid(3), pid(1), pid(2)}, 7);
  EXPECT_EQ(v.members.front(), pid(1));
  Writer w;
  v.encode(w);
  Reader r(w.bytes());
  EXPECT_EQ(View::decode(r), v);
  EXPECT_TRUE(v.contains(pid(2)));
  EXPECT_EQ(v.index_of(pid(3)), 2u);
  EXPECT_FALSE(v.index_of(pid(4)));
  auto bad = v;
  bad.members = {pid(2), pid(1)};
  EXPECT_THROW(bad.validate(), Error);
  bad.members = {};
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_THROW(validate_group_name(std::string(129, 'a')), Error);
  EXPECT_THROW(validate_group_name(""), Error);
  Bytes wire = w.bytes();
  wire.pop_back();
  Reader short_r(wire);
  EXPECT_THROW(View::decode(short_r), Error);
}

TEST(ViewOrder, EpochThenInitiator) {
  ViewId a{2, pid(5)}, b{2, pid(6)}, c{3, pid(1)};
  EXPECT_LT(a, b);
  EXPECT_LT(b, c);
}

TEST(Suspicion, FreshHeartbeatsSuspectNobody) {
  SuspicionState s;
  s.reset(view_of({pid(1), pid(2), pid(3)}), pid(1), 0);
  for (netsim::SimTime t = 500; t <= 5000; t += 500) {
    s.heard(pid(2), t);
    s.heard(pid(3), t);
    EXPECT_TRUE(suspicion_check(s, t + 10, 1500).empty());
  }
}

TEST(Suspicion, SilentMemberSuspectedOnce) {
  SuspicionState s;
  s.reset(view_of({pid(1), pid(2), pid(3)}), pid(1), 0);
  s.heard(pid(2), 1400);
  EXPECT_TRUE(suspicion_check(s, 1500, 1500).empty());
  EXPECT_EQ(suspicion_check(s, 1501, 1500), (std::set<ProcessId>{pid(3)}));
  EXPECT_TRUE(suspicion_check(s, 1600, 1500).empty());
  EXPECT_EQ(s.suspects, (std::set<ProcessId>{pid(3)}));
  EXPECT_EQ(s.last_heard.count(pid(1)), 0u);  // never self
}

TEST(Coordinator, SmallestNonSuspect) {
  std::vector<ProcessId> m{pid(1), pid(2), pid(3)};
  EXPECT_EQ(coordinator_of(m, {}), pid(1));
  EXPECT_EQ(coordinator_of(m, {pid(1)}), pid(2));
  EXPECT_FALSE(coordinator_of(m, {pid(1), pid(2), pid(3)}));
}

// Heartbeats every H over a link losing 20%; timeout 3H. A false suspicion
// needs three consecutive losses, so its per-interval rate is at most 0.2^3.
TEST(Suspicion, FalseSuspicionRateWithinBound) {
  constexpr netsim::SimTime H = 500;
  constexpr int kIntervals = 4000;
  std::uint64_t intervals = 0, false_suspicions = 0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    netsim::LinkPolicy p;
    p.loss_prob = 0.2;
    p.delay_min = p.delay_max = 20;
    netsim::Network net(seed, p);
    auto a = net.attach(netsim::EndpointAddr::sim(1));
    auto b = net.attach(netsim::EndpointAddr::sim(2));
    SuspicionState s;
    auto me = pid(2), peer = pid(1);
    s.reset(view_of({me, peer}), me, 0);
    b->set_receiver([&](const netsim::Datagram& d) { (void)d;
      s.heard(peer, b->now());
    });
    for (int k = 1; k <= kIntervals; ++k) {
      a->send(b->local_addr(), Bytes{1});
      net.run_until(k * H + 25);
      ++intervals;
      if (!suspicion_check(s, net.now(), 3 * H).empty()) {
        ++false_suspicions;
        s.reset(view_of({me, peer}), me, net.now());
      }
    }
  }
  double rate = static_cast<double>(false_suspicions) / static_cast<double>(intervals);
  EXPECT_GT(false_suspicions, 0u);
  EXPECT_LE(rate, 0.008) << false_suspicions << "/" << intervals;
}
