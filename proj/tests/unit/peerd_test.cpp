#include <fstream>
#include <thread>

#include <boost/asio/io_context.hpp>
#include <gtest/gtest.h>

#include "collab/peerd/config.hpp"
#include "collab/peerd/event_log.hpp"
#include "collab/peerd/real_transport.hpp"
#include "collab/peerd/sim_run.hpp"
#include "support/peers.hpp"

using namespace collab;
using namespace collab::peerd;
using nlohmann::json;

namespace {

std::string config_error(const json& doc) {
  try {
    parse_config(doc, "/tmp");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::config);
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  auto loaded = parse_config({{"identity_path", "id/identity.json"}, {"listen", "127.0.0.1:9000"}}, "/srv/peer");
  const auto& c = loaded.config;
  EXPECT_TRUE(loaded.warnings.empty());
  EXPECT_EQ(c.identity_path, "/srv/peer/id/identity.json");
  EXPECT_EQ(c.trust_mode, identity::TrustMode::incremental);
  EXPECT_EQ(c.control_port, 7777);
  EXPECT_EQ(c.lobby_group, "lobby");
  EXPECT_TRUE(c.bootstrap.empty());
  EXPECT_TRUE(c.share_dirs.empty());
  EXPECT_FALSE(c.relay_notes);
  EXPECT_FALSE(c.hits_via_group);
  EXPECT_EQ(c.data_dir, "/srv/peer/id");
  EXPECT_EQ(c.download_dir, "/srv/peer/id/downloads");
  EXPECT_EQ(c.advertise, c.listen);
  EXPECT_EQ(c.listen.port, 9000);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(config_error({{"identity_path", "i"}, {"listen", "127.0.0.1:1"}, {"trust_mode", "both"}}).find("trust_mode"),
            std::string::npos);
  EXPECT_NE(config_error({{"listen", "127.0.0.1:1"}}).find("identity_path"), std::string::npos);
  EXPECT_NE(config_error({{"identity_path", "i"}}).find("listen"), std::string::npos);
  EXPECT_NE(config_error({{"identity_path", "i"}, {"listen", "nowhere"}}).find("listen"), std::string::npos);
  EXPECT_NE(config_error({{"identity_path", "i"}, {"listen", "127.0.0.1:1"}, {"control_port", "x"}}).find("control_port"),
            std::string::npos);
  EXPECT_NE(config_error({{"identity_path", "i"}, {"listen", "127.0.0.1:1"}, {"trust_mode", "registered"}}).find("roots"),
            std::string::npos);
}

TEST(Config, UnknownKeysWarn) {
  auto loaded = parse_config({{"identity_path", "i"}, {"listen", "127.0.0.1:1"}, {"colour", "blue"}}, "/tmp");
  ASSERT_EQ(loaded.warnings.size(), 1u);
  EXPECT_NE(loaded.warnings[0].find("colour"), std::string::npos);
}

TEST(Config, LoadFromFileAndValidatePaths) {
  collab::testing::TempDir dir("config");
  std::ofstream(dir.path() / "peer.json") << R"({"identity_path": "state/id.json", "listen": "127.0.0.1:7000",
    "share_dirs": ["missing"], "control_port": 8000})";
  auto c = load_config(dir.path() / "peer.json").config;
  EXPECT_EQ(c.control_port, 8000);
  try {
    validate_paths(c);
    FAIL() << "missing share dir accepted";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("share_dirs"), std::string::npos);
  }
  c.share_dirs.clear();
  validate_paths(c);
  EXPECT_TRUE(std::filesystem::is_directory(c.download_dir));
  EXPECT_THROW(load_config(dir.path() / "absent.json"), Error);
}

TEST(EventLog, SequenceAndCursor) {
  EventLog log(3);
  EXPECT_EQ(log.last_seq(), 0u);
  for (int i = 0; i < 5; ++i) log.append("message", {{"i", i}});
  auto all = log.since(0);
  ASSERT_EQ(all.size(), 3u);  // retention drops the oldest
  EXPECT_EQ(all.front().seq, 3u);
  EXPECT_EQ(all.back().seq, 5u);
  EXPECT_EQ(log.since(4).size(), 1u);
  EXPECT_TRUE(log.since(5).empty());
  EXPECT_EQ(log.since(0, 2).back().seq, 4u);
}

TEST(EventLog, WaitWakesOnAppend) {
  EventLog log;
  EXPECT_FALSE(log.wait(0, std::chrono::milliseconds(10)));
  std::thread writer([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    log.append("roster", json::object());
  });
  EXPECT_TRUE(log.wait(0, std::chrono::seconds(5)));
  writer.join();
}

namespace {

struct Recorder : netsim::StreamListener {
  std::vector<std::string> opened;
  std::vector<std::string> messages;
  std::vector<std::string> closed;
  netsim::StreamId last = 0;
  void on_stream_open(netsim::StreamId id, const netsim::EndpointAddr&, const std::string& service) override {
    last = id;
    opened.push_back(service);
  }
  void on_stream_message(netsim::StreamId id, Bytes m) override {
    last = id;
    messages.emplace_back(m.begin(), m.end());
  }
  void on_stream_closed(netsim::StreamId, std::string_view reason) override { closed.emplace_back(reason); }
};

ByteView view(std::string_view s) { return ByteView(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()); }

template <typename Pred>
bool pump(boost::asio::io_context& io, Pred done) {
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
  while (!done() && std::chrono::steady_clock::now() < deadline) {
    io.run_for(std::chrono::milliseconds(5));
    io.restart();
  }
  return done();
}

}  // namespace

TEST(RealTransport, DatagramsAndStreamsOverLoopback) {
  boost::asio::io_context io;
  auto any = netsim::EndpointAddr::parse("127.0.0.1:0");
  RealTransport a(io, any), b(io, any);
  ASSERT_NE(a.local_addr().port, 0);

  std::vector<netsim::Datagram> got;
  b.set_receiver([&](const netsim::Datagram& d) { got.push_back(d); });
  a.send(b.local_addr(), view("hello"));
  ASSERT_TRUE(pump(io, [&] { return !got.empty(); }));
  EXPECT_EQ(std::string(got[0].payload.begin(), got[0].payload.end()), "hello");
  EXPECT_EQ(got[0].src, a.local_addr());

  Recorder server, client;
  b.listen("echo", &server);
  auto sid = a.connect(b.local_addr(), "echo", &client);
  a.stream_send(sid, view("one"));
  a.stream_send(sid, view(std::string(200'000, 'x')));
  ASSERT_TRUE(pump(io, [&] { return server.messages.size() == 2; }));
  EXPECT_EQ(server.opened, std::vector<std::string>{"echo"});
  EXPECT_EQ(server.messages[0], "one");
  EXPECT_EQ(server.messages[1].size(), 200'000u);

  b.stream_send(server.last, view("back"));
  b.stream_close(server.last);
  ASSERT_TRUE(pump(io, [&] { return !client.closed.empty(); }));
  EXPECT_EQ(client.messages, std::vector<std::string>{"back"});
  EXPECT_EQ(client.closed[0], "closed");
  EXPECT_TRUE(server.closed.empty());  // the closer is not notified

  Recorder nobody;
  a.connect(netsim::EndpointAddr::parse("127.0.0.1:1"), "echo", &nobody);
  ASSERT_TRUE(pump(io, [&] { return !nobody.closed.empty(); }));
  EXPECT_EQ(nobody.closed[0], "connect");
}

TEST(RealTransport, TimersFireAndCancel) {
  boost::asio::io_context io;
  RealTransport t(io, netsim::EndpointAddr::parse("127.0.0.1:0"));
  int fired = 0;
  t.schedule(5, [&] { ++fired; });
  auto dead = t.schedule(5, [&] { fired += 100; });
  t.cancel(dead);
  ASSERT_TRUE(pump(io, [&] { return fired > 0; }));
  io.run_for(std::chrono::milliseconds(20));
  EXPECT_EQ(fired, 1);
}

TEST(RealTransport, BindConflictIsIoError) {
  boost::asio::io_context io;
  RealTransport a(io, netsim::EndpointAddr::parse("127.0.0.1:0"));
  try {
    RealTransport b(io, a.local_addr());
    FAIL() << "second bind succeeded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io);
  }
}

TEST(SimRun, SameScenarioSameDigest) {
  auto sc = netsim::Scenario::from_json(json::parse(R"({"seed": 3,
    "policy": {"loss_prob": 0.05, "delay_min_ms": 5, "delay_max_ms": 60, "duplicate_prob": 0.01},
    "faults": [{"at_ms": 15000, "kind": "partition", "args": {"groups": [[1, 2], [3]]}},
               {"at_ms": 22000, "kind": "heal", "args": {}}],
    "workload": {"peers": 3, "duration_ms": 40000, "venue_messages": 10, "shares_per_peer": 1,
                 "file_bytes": 20000, "queries": 3, "fetches": 1, "notes": 2}})"));
  collab::testing::TempDir d1("simrun1"), d2("simrun2");
  auto r1 = run_scenario(sc, d1.path());
  auto r2 = run_scenario(sc, d2.path());
  EXPECT_EQ(r1.digest, r2.digest);
  EXPECT_EQ(r1.summary, r2.summary);
  EXPECT_GT(r1.digest.event_count, 1000u);
  sc.seed = 4;
  collab::testing::TempDir d3("simrun3");
  EXPECT_NE(run_scenario(sc, d3.path()).digest.hash, r1.digest.hash);
}
