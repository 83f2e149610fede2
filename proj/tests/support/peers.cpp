#include "support/peers.hpp"

#include <random>

namespace collab::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  path_ = fs::temp_directory_path() / ("collab-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

PeerNet::PeerNet(std::uint64_t seed, netsim::LinkPolicy policy, PeerNetOptions options)
    : seed_(seed),
      opt_(std::move(options)),
      root_("peers"),
      net_(std::make_unique<netsim::Network>(seed, std::move(policy))) {
  for (std::size_t i = 0; i < opt_.peers; ++i) {
    Slot s;
    s.id = sim_identity(seed, i);
    auto& c = s.config;
    c.identity_path = dir(i) / "identity.json";
    c.listen = addr(i);
    c.advertise = addr(i);
    c.lobby_group = "lobby";
    c.relay_notes = opt_.relay_notes;
    c.hits_via_group = opt_.hits_via_group;
    c.open_shares = opt_.open_shares;
    c.data_dir = dir(i);
    c.download_dir = dir(i) / "downloads";
    c.display_name = "Peer " + std::to_string(i);
    c.beacon_ms = opt_.beacon_ms;
    if (opt_.full_bootstrap) {
      for (std::size_t j = 0; j < opt_.peers; ++j) {
        if (j != i) c.bootstrap.push_back(addr(j));
      }
    } else if (i != 0) {
      c.bootstrap.push_back(addr(0));
    }
    fs::create_directories(c.download_dir);
    slots_.push_back(std::move(s));
  }
}

PeerNet::~PeerNet() {
  for (auto& s : slots_) {
    s.api.reset();
    s.peer.reset();
    s.ep.reset();
  }
}

fs::path PeerNet::dir(std::size_t i) const { return root_.path() / ("peer" + std::to_string(i)); }

void PeerNet::start(std::size_t i) {
  auto& s = slots_[i];
  if (s.peer) return;
  s.ep = net_->attach(addr(i));
  peerd::PeerRuntime rt;
  auto* net = net_.get();
  rt.wall_clock = [net] { return kCertEpoch + net->now(); };
  rt.cert_clock = [] { return kCertEpoch + 1000; };
  rt.rng = std::make_shared<crypto::SeededRandom>(seed_, "peer-" + std::to_string(i) + "-" +
                                                             std::to_string(s.incarnation++));
  rt.group = opt_.group;
  rt.persist = opt_.persist;
  s.peer = std::make_unique<peerd::Peer>(*s.ep, s.id, s.config, rt);
  s.api = std::make_unique<peerd::ControlApi>(*s.peer);
  s.peer->start();
}

void PeerNet::start_all() {
  for (std::size_t i = 0; i < size(); ++i) {
    start(i);
    if (i == 0) net_->run_for(100);
  }
}

void PeerNet::stop(std::size_t i) {
  auto& s = slots_[i];
  s.api.reset();
  s.peer.reset();
  s.ep.reset();
}

bool PeerNet::run_until(const std::function<bool()>& done, netsim::SimTime cap) {
  auto deadline = net_->now() + cap;
  while (net_->now() < deadline) {
    if (done()) return true;
    net_->run_for(50);
  }
  return done();
}

bool PeerNet::settle_lobby(const std::vector<std::size_t>& members, netsim::SimTime cap) {
  std::vector<membership::ProcessId> want;
  for (auto i : members) want.push_back({fp(i), addr(i)});
  std::sort(want.begin(), want.end());
  return run_until(
      [&] {
        std::optional<membership::ViewId> id;
        for (auto i : members) {
          if (!online(i)) return false;
          auto* l = slots_[i].peer->lobby();
          if (l == nullptr || !l->view() || l->view()->members != want || !l->secure() || l->changing()) return false;
          if (id && *id != l->view()->id) return false;
          id = l->view()->id;
        }
        return true;
      },
      cap);
}

bool PeerNet::settle_roster(const std::vector<std::size_t>& members, netsim::SimTime cap) {
  return run_until(
      [&] {
        for (auto i : members) {
          if (!online(i)) return false;
          for (auto j : members) {
            if (i != j && !slots_[i].peer->presence().roster().online(fp(j))) return false;
          }
        }
        return true;
      },
      cap);
}

peerd::ApiResponse PeerNet::call(std::size_t i, const std::string& method, const std::string& path,
                                 const nlohmann::json& body) {
  peerd::ApiRequest req;
  req.method = method;
  auto q = path.find('?');
  req.path = path.substr(0, q);
  if (q != std::string::npos) {
    auto rest = path.substr(q + 1);
    std::size_t pos = 0;
    while (pos < rest.size()) {
      auto amp = rest.find('&', pos);
      auto kv = rest.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
      auto eq = kv.find('=');
      req.query[kv.substr(0, eq)] = eq == std::string::npos ? "" : kv.substr(eq + 1);
      if (amp == std::string::npos) break;
      pos = amp + 1;
    }
  }
  if (!body.is_null()) req.body = body.dump();
  return slots_[i].api->handle(req);
}

}  // namespace collab::testing
