#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "collab/common/error.hpp"
#include "collab/ordcast/delivery.hpp"
#include "collab/ordcast/flush.hpp"

using namespace collab;
using namespace collab::ordcast;

namespace {

SeqMsg msg(std::uint32_t sender, std::uint64_t seq, std::uint64_t ts, Mode mode = Mode::fifo, std::string body = {}) {
  if (body.empty()) body = std::to_string(sender) + ":" + std::to_string(seq);
  SeqMsg m;
  m.sender = sender;
  m.seq = seq;
  m.ts = ts;
  m.mode = mode;
  m.payload = Bytes(body.begin(), body.end());
  m.wire = m.payload;
  return m;
}

std::vector<std::uint64_t> seqs(const std::vector<Delivery>& ds) {
  std::vector<std::uint64_t> out;
  for (const auto& d : ds) out.push_back(d.seq);
  return out;
}

}  // namespace

TEST(Fifo, ReorderedArrivals) {
  DeliveryState st(2, 0);
  st.accept(msg(1, 1, 1));
  EXPECT_EQ(seqs(st.drain()), (std::vector<std::uint64_t>{1}));
  st.accept(msg(1, 3, 3));
  EXPECT_TRUE(st.drain().empty());
  st.accept(msg(1, 2, 2));
  EXPECT_EQ(seqs(st.drain()), (std::vector<std::uint64_t>{2, 3}));
}

TEST(Fifo, DuplicateDeliveredOnce) {
  DeliveryState st(2, 0);
  EXPECT_TRUE(st.accept(msg(1, 1, 1)));
  EXPECT_TRUE(st.accept(msg(1, 2, 2)));
  EXPECT_FALSE(st.accept(msg(1, 2, 2)));
  EXPECT_EQ(st.drain().size(), 2u);
  EXPECT_FALSE(st.accept(msg(1, 2, 2)));
  EXPECT_TRUE(st.drain().empty());
  EXPECT_EQ(st.duplicates(), 2u);
}

TEST(Lamport, SendAfterReceiveIsLater) {
  DeliveryState st(2, 0);
  EXPECT_EQ(st.next_seq(), 1u);
  st.accept(msg(1, 1, 10));
  EXPECT_GE(st.stamp(), 11u);
  EXPECT_EQ(st.next_seq(), 2u);
}

TEST(Agreed, SingleMemberImmediate) {
  DeliveryState st(1, 0);
  auto ts = st.stamp();
  st.accept(msg(0, 1, ts, Mode::agreed));
  EXPECT_EQ(st.drain().size(), 1u);
}

TEST(Agreed, EqualTimestampsBreakBySender) {
  DeliveryState st(3, 2);
  st.accept(msg(1, 1, 5, Mode::agreed));
  EXPECT_TRUE(st.drain().empty());  // sender 0 has not been heard at ts 5
  st.accept(msg(0, 1, 5, Mode::agreed));
  auto out = st.drain();
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].sender, 0u);
  EXPECT_EQ(out[1].sender, 1u);
}

TEST(Agreed, WaitsForEveryMember) {
  DeliveryState st(3, 0);
  st.accept(msg(1, 1, 4, Mode::agreed));
  st.on_heartbeat(1, 4, 1);
  EXPECT_TRUE(st.drain().empty());  // member 2 might still send ts < 4
  st.on_heartbeat(2, 3, 0);
  EXPECT_TRUE(st.drain().empty());
  st.on_heartbeat(2, 4, 0);
  EXPECT_EQ(st.drain().size(), 1u);
}

TEST(Agreed, HeartbeatAheadOfGapDoesNotCount) {
  DeliveryState st(2, 0);
  st.accept(msg(1, 2, 7, Mode::agreed));
  st.on_heartbeat(1, 9, 2);  // claims seq 2 is out; seq 1 still missing
  EXPECT_EQ(st.heard(1), 0u);
  st.accept(msg(1, 1, 6, Mode::agreed));
  EXPECT_EQ(st.heard(1), 9u);
  EXPECT_EQ(st.drain().size(), 2u);
}

// Random 4-member histories: every member's agreed order equals the global
// (ts, sender) sort.
TEST(Agreed, RandomRunsMatchSortOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t n = 4;
    std::vector<SeqMsg> all;
    std::vector<std::uint64_t> clock(n, 0), seq(n, 0);
    for (int k = 0; k < 30; ++k) {
      auto s = static_cast<std::uint32_t>(rng() % n);
      clock[s] = std::max(clock[s], static_cast<std::uint64_t>(rng() % 20)) + 1;
      all.push_back(msg(s, ++seq[s], clock[s], Mode::agreed));
    }
    auto oracle = all;
    std::sort(oracle.begin(), oracle.end(),
              [](const SeqMsg& a, const SeqMsg& b) { return std::tie(a.ts, a.sender) < std::tie(b.ts, b.sender); });
    std::uint64_t top = 0;
    for (auto c : clock) top = std::max(top, c);
    for (std::uint32_t me = 0; me < n; ++me) {
      DeliveryState st(n, me);
      // Own messages enter at send time, in order; the rest arrive shuffled.
      std::vector<SeqMsg> arrival, others;
      for (const auto& m : all) (m.sender == me ? arrival : others).push_back(m);
      std::shuffle(others.begin(), others.end(), rng);
      arrival.insert(arrival.end(), others.begin(), others.end());
      std::vector<Delivery> got;
      for (auto& m : arrival) {
        st.accept(m);
        auto d = st.drain();
        got.insert(got.end(), d.begin(), d.end());
      }
      for (std::uint32_t q = 0; q < n; ++q) {
        if (q != me) st.on_heartbeat(q, top, seq[q]);
      }
      while (st.clock() < top) st.stamp();
      auto d = st.drain();
      got.insert(got.end(), d.begin(), d.end());
      ASSERT_EQ(got.size(), oracle.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        ASSERT_EQ(got[i].sender, oracle[i].sender) << trial << " " << me << " " << i;
        ASSERT_EQ(got[i].seq, oracle[i].seq);
      }
    }
  }
}

TEST(Fragments, ReassembledBeforeDelivery) {
  Bytes big(20'000);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<std::uint8_t>(i * 7);
  auto parts = fragment(big);
  ASSERT_EQ(parts.size(), 3u);
  DeliveryState st(2, 0);
  for (std::size_t i = parts.size(); i-- > 0;) {
    SeqMsg m = msg(1, i + 1, i + 1);
    m.payload = parts[i];
    m.frag_index = static_cast<std::uint16_t>(i);
    m.frag_count = 3;
    st.accept(m);
  }
  auto out = st.drain();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].payload, big);
  EXPECT_EQ(out[0].seq, 3u);
  EXPECT_THROW(fragment(Bytes(70 * 1024)), Error);
  EXPECT_EQ(fragment(Bytes()).size(), 1u);
}

TEST(Stability, NothingStableNothingPurged) {
  DeliveryState st(2, 0);
  st.accept(msg(0, 1, st.stamp()));
  EXPECT_EQ(st.gc(), 0u);
}

TEST(Stability, AckedPrefixPurged) {
  DeliveryState st(3, 0);
  for (std::uint64_t s = 1; s <= 12; ++s) st.accept(msg(0, s, st.stamp()));
  st.drain();
  st.on_ack_vector(1, {10, 0, 0});
  EXPECT_EQ(st.gc(), 0u);
  st.on_ack_vector(2, {10, 0, 0});
  EXPECT_EQ(st.gc(), 10u);
  EXPECT_EQ(st.buffered(), 2u);
  EXPECT_EQ(st.unstable_own(), 2u);
  EXPECT_TRUE(st.stored(0, {1, 10}).empty());
  EXPECT_EQ(st.stored(0, {11, 12}).size(), 2u);
}

TEST(Gaps, MissingRanges) {
  DeliveryState st(2, 0);
  st.accept(msg(1, 2, 2));
  st.accept(msg(1, 5, 5));
  st.on_heartbeat(1, 9, 7);
  EXPECT_EQ(st.missing(1), (std::vector<SeqRange>{{1, 1}, {3, 4}, {6, 7}}));
  EXPECT_EQ(st.missing(1, 4), (std::vector<SeqRange>{{1, 1}, {3, 4}}));
  EXPECT_TRUE(st.has_gaps());
}

TEST(Flush, DeliverCutForcesAgreedResidue) {
  DeliveryState st(3, 0);
  st.accept(msg(1, 1, 3, Mode::agreed));
  st.accept(msg(2, 1, 2, Mode::agreed));
  st.accept(msg(2, 2, 4, Mode::agreed));
  st.freeze();
  EXPECT_TRUE(st.drain().empty());
  EXPECT_THROW(st.deliver_cut({0, 2, 1}), Error);
  auto out = st.deliver_cut({0, 1, 1});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].sender, 2u);  // ts 2 first
  EXPECT_EQ(out[1].sender, 1u);
  EXPECT_EQ(st.contiguous(2), 1u);  // seq 2 above the cut is discarded
}

TEST(Flush, ControlStillFlowsWhileFrozen) {
  DeliveryState st(2, 0);
  auto m = msg(1, 1, 1);
  m.control = true;
  st.accept(m);
  st.accept(msg(1, 2, 2));
  st.freeze();
  auto out = st.drain();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].control);
}

TEST(Flush, EmptyCut) {
  DeliveryState st(2, 0);
  EXPECT_TRUE(st.deliver_cut({0, 0}).empty());
}

TEST(Flush, CutsTakeMaxAndSmallestProvider) {
  using membership::ProcessId;
  using membership::View;
  auto pid = [](std::uint8_t b) {
    ProcessId p;
    p.fingerprint.fill(b);
    p.addr = netsim::EndpointAddr::sim(b);
    return p;
  };
  View v;
  v.group = "g";
  v.id = {3, pid(1)};
  v.members = {pid(1), pid(2), pid(3)};
  View w = v;
  w.id = {2, pid(4)};
  w.members = {pid(4)};
  std::vector<FlushReport> reports{
      {pid(2), v, {4, 7, 1}},
      {pid(1), v, {5, 7, 0}},
      {pid(4), w, {9}},
      {pid(5), std::nullopt, {}},
      {pid(3), v, {1}},  // malformed, ignored
  };
  auto cuts = compute_cuts(reports);
  ASSERT_EQ(cuts.size(), 2u);
  const auto& c = cuts[0].old_view == v.id ? cuts[0] : cuts[1];
  EXPECT_EQ(c.cut, (std::vector<std::uint64_t>{5, 7, 1}));
  EXPECT_EQ(c.provider, (std::vector<ProcessId>{pid(1), pid(1), pid(2)}));
}
