#include "collab/peerd/sim_run.hpp"

#include <fstream>
#include <random>

#include "collab/peerd/peer.hpp"

namespace collab::peerd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* const kWords[] = {"higgs", "muon", "calib", "trigger", "jet", "lumi", "beam", "quark"};

struct Workload {
  std::size_t peers = 4;
  netsim::SimTime settle_ms = 10'000;
  netsim::SimTime duration_ms = 60'000;
  netsim::SimTime beacon_ms = 1000;
  int venue_messages = 20;
  int shares_per_peer = 3;
  std::size_t file_bytes = 100'000;
  int queries = 6;
  int fetches = 2;
  int notes = 2;
  bool relay_notes = true;

  static Workload from(const json& w) {
    Workload o;
    o.peers = w.value("peers", o.peers);
    o.settle_ms = w.value("settle_ms", o.settle_ms);
    o.duration_ms = w.value("duration_ms", o.duration_ms);
    o.beacon_ms = w.value("beacon_ms", o.beacon_ms);
    o.venue_messages = w.value("venue_messages", o.venue_messages);
    o.shares_per_peer = w.value("shares_per_peer", o.shares_per_peer);
    o.file_bytes = w.value("file_bytes", o.file_bytes);
    o.queries = w.value("queries", o.queries);
    o.fetches = w.value("fetches", o.fetches);
    o.notes = w.value("notes", o.notes);
    o.relay_notes = w.value("relay_notes", o.relay_notes);
    if (o.peers == 0 || o.peers > 64) throw Error(Errc::invalid_argument, "workload.peers must be 1..64");
    return o;
  }
};

struct SimPeer {
  std::unique_ptr<netsim::SimEndpoint> ep;
  std::unique_ptr<Peer> peer;
};

}  // namespace

SimRunResult run_scenario(const netsim::Scenario& sc, const fs::path& workdir) {
  auto w = Workload::from(sc.workload);
  auto net = sc.make_network();
  std::mt19937_64 rng(sc.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<SimPeer> peers(w.peers);
  auto* n = net.get();

  for (std::size_t i = 0; i < w.peers; ++i) {
    auto addr = netsim::EndpointAddr::sim(static_cast<std::uint32_t>(i + 1));
    crypto::SeededRandom id_rng(sc.seed, "identity-" + std::to_string(i));
    auto id = identity::new_identity("peer" + std::to_string(i), id_rng, kSimEpochMs);
    PeerConfig c;
    c.data_dir = workdir / ("peer" + std::to_string(i));
    c.download_dir = c.data_dir / "downloads";
    c.identity_path = c.data_dir / "identity.json";
    fs::create_directories(c.download_dir);
    c.listen = c.advertise = addr;
    if (i != 0) c.bootstrap.push_back(netsim::EndpointAddr::sim(1));
    c.relay_notes = w.relay_notes;
    c.beacon_ms = w.beacon_ms;
    c.display_name = "Peer " + std::to_string(i);
    PeerRuntime rt;
    rt.wall_clock = [n] { return kSimEpochMs + n->now(); };
    rt.cert_clock = [] { return kSimEpochMs + 1000; };
    rt.rng = std::make_shared<crypto::SeededRandom>(sc.seed, "peer-" + std::to_string(i));
    rt.persist = false;
    peers[i].ep = net->attach(addr);
    peers[i].peer = std::make_unique<Peer>(*peers[i].ep, id, c, rt);
    peers[i].peer->start();
    if (i == 0) net->run_for(100);
  }
  net->run_until(w.settle_ms);
  auto& p0 = *peers[0].peer;

  // Chat: one public venue, everyone who can see it joins.
  std::string venue_id;
  if (auto v = p0.presence().create_venue("scenario", presence::Visibility::public_)) venue_id = v->id;
  net->run_for(3 * w.beacon_ms);
  for (std::size_t i = 1; i < w.peers; ++i) (void)peers[i].peer->presence().join_venue(venue_id);
  net->run_for(5000);
  for (int k = 0; k < w.venue_messages; ++k) {
    auto i = rng() % w.peers;
    (void)peers[i].peer->presence().post_message(venue_id, "message " + std::to_string(k));
    net->run_for(50);
  }

  // Shares and searches.
  for (std::size_t i = 0; i < w.peers; ++i) {
    auto dir = workdir / ("peer" + std::to_string(i)) / "share";
    fs::create_directories(dir);
    for (int s = 0; s < w.shares_per_peer; ++s) {
      auto name = std::string(kWords[rng() % std::size(kWords)]) + "_" + std::to_string(i) + "_" + std::to_string(s) + ".dat";
      std::string content(w.file_bytes, '\0');
      for (auto& ch : content) ch = static_cast<char>(rng());
      std::ofstream(dir / name, std::ios::binary) << content;
      (void)peers[i].peer->files().add_share(dir / name, {});
    }
  }
  std::vector<std::pair<std::size_t, fileshare::QueryId>> issued;
  for (int q = 0; q < w.queries; ++q) {
    auto i = rng() % w.peers;
    if (auto id = peers[i].peer->files().issue_query(kWords[rng() % std::size(kWords)])) issued.push_back({i, *id});
    net->run_for(100);
  }
  net->run_for(3000);
  int fetching = 0;
  for (const auto& [origin, qid] : issued) {
    auto& files = peers[origin].peer->files();
    for (const auto& hit : *files.hits(qid)) {
      if (fetching >= w.fetches || hit.responder == peers[origin].peer->node().identity().fingerprint()) continue;
      const auto& e = hit.entries.front();
      auto dest = peers[origin].peer->config().download_dir / (std::to_string(fetching) + "_" + e.name);
      if (files.fetch(e, dest)) ++fetching;
    }
  }

  // Notes.
  for (int k = 0; k < w.notes; ++k) {
    auto a = rng() % w.peers;
    auto r = w.peers == 1 ? a : (a + 1 + rng() % (w.peers - 1)) % w.peers;
    (void)peers[a].peer->presence().leave_note(peers[r].peer->node().identity().fingerprint(), "note " + std::to_string(k));
  }
  net->run_until(std::max(net->now(), w.duration_ms));

  json per_peer = json::array();
  for (auto& sp : peers) {
    auto& p = *sp.peer;
    const auto* t = p.presence().transcript(venue_id);
    std::size_t done = 0;
    for (const auto& j : p.files().jobs()) done += j.state == fileshare::JobState::done ? 1 : 0;
    json view = nullptr;
    if (p.lobby() != nullptr && p.lobby()->view()) view = p.lobby()->view()->id.to_string();
    per_peer.push_back({{"lobby_view", view},
                        {"roster_online", [&] {
                           std::size_t online = 0;
                           for (const auto& [fp, e] : p.presence().roster().entries()) online += e.online() ? 1 : 0;
                           return online;
                         }()},
                        {"venue_messages", t == nullptr ? 0 : t->size()},
                        {"transfers_done", done},
                        {"notes_received", p.presence().notes().inbox().size()}});
  }
  json summary{{"seed", sc.seed}, {"peers", per_peer}, {"queries", issued.size()}, {"fetches", fetching}};
  auto digest = net->digest();
  for (auto& sp : peers) sp.peer.reset();
  for (auto& sp : peers) sp.ep.reset();
  return {digest, summary};
}

}  // namespace collab::peerd
