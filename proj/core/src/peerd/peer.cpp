#include "collab/peerd/peer.hpp"

#include <chrono>
#include <fstream>

namespace collab::peerd {

using nlohmann::json;
namespace fs = std::filesystem;

identity::Identity load_or_create_identity(const fs::path& path, const std::string& subject,
                                           crypto::RandomSource& rng, std::int64_t now) {
  std::error_code ec;
  if (fs::exists(path, ec)) return identity::load_identity(path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  auto id = identity::new_identity(subject, rng, now);
  identity::save_identity(id, path);
  return id;
}

Peer::Peer(netsim::Transport& transport, identity::Identity id, PeerConfig config, PeerRuntime runtime)
    : transport_(transport), config_(std::move(config)), runtime_(std::move(runtime)) {
  if (!runtime_.rng) runtime_.rng = std::make_shared<crypto::SystemRandom>();
  group::NodeOptions no;
  no.trust_mode = config_.trust_mode;
  no.cert_clock = runtime_.cert_clock;
  policy_.add_stakeholder(id.cert);
  node_ = std::make_unique<group::Node>(transport_, id, runtime_.rng, no);
  for (const auto& root : config_.roots) {
    std::ifstream in(root);
    node_->trust().add_root(identity::IdentityCert::from_json(json::parse(in)));
  }
  if (runtime_.persist) {
    std::ifstream pins(config_.data_dir / "pins.json");
    if (pins) {
      auto doc = json::parse(pins, nullptr, false);
      if (!doc.is_discarded()) node_->trust().load_pins(doc);
    }
  }
  install_default_policy();

  auto sink = [this](const std::string& kind, const json& payload) { events_.append(kind, payload); };
  presence::PresenceOptions po;
  po.display_name = config_.display_name;
  po.location = config_.location;
  po.beacon_ms = config_.beacon_ms;
  po.relay_notes = config_.relay_notes;
  po.relay_cap = runtime_.note_relay_cap;
  if (runtime_.persist) po.note_store = config_.data_dir / "notes.jsonl";
  po.venue_group = runtime_.group;
  po.wall_clock = runtime_.wall_clock;
  presence_ = std::make_unique<presence::Presence>(*node_, policy_, po, sink);

  fileshare::FileShareOptions fo;
  if (runtime_.persist) fo.manifest = config_.data_dir / "shares.jsonl";
  fo.hits_via_group = config_.hits_via_group;
  fo.wall_clock = runtime_.wall_clock;
  files_ = std::make_unique<fileshare::FileShare>(
      *node_, fo, [this](const std::string& r, const identity::IdentityCert& c) { return authorize_file(r, c); },
      sink);
}

Peer::~Peer() {
  try {
    save_state();
  } catch (const std::exception&) {
  }
  files_.reset();
  presence_.reset();
  node_.reset();
}

std::int64_t Peer::wall() const {
  if (runtime_.wall_clock) return runtime_.wall_clock();
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void Peer::install_default_policy() {
  const auto& me = node_->identity();
  auto owner_only = [&](const std::string& pattern) {
    identity::PolicyDocument d;
    d.resource_pattern = pattern;
    d.allow_subjects = {me.cert.subject};
    d.sign(me);
    policy_.add_policy(d);
  };
  owner_only("venue:*");
  owner_only("note:*");
  identity::PolicyDocument files;
  files.resource_pattern = "file:*";
  files.require_attributes = {"peer"};
  files.sign(me);
  policy_.add_policy(files);
  grant_peer(me.cert.subject);
}

void Peer::grant_peer(const std::string& subject) {
  if (!granted_.insert(subject).second) return;
  identity::AttributeAssertion a;
  a.subject = subject;
  a.attributes = {"peer"};
  a.sign(node_->identity());
  policy_.add_assertion(a);
}

identity::AuthzDecision Peer::authorize_file(const std::string& resource, const identity::IdentityCert& who) {
  // With open shares every certificate this node accepted counts as a peer.
  if (config_.open_shares && node_->cert_of(who.fingerprint()) != nullptr) grant_peer(who.subject);
  return policy_.authorize(resource, who.subject);
}

void Peer::start() {
  std::optional<netsim::EndpointAddr> contact;
  if (!config_.bootstrap.empty()) contact = config_.bootstrap.front();
  group::GroupCallbacks cb;
  cb.on_message = [this](const group::GroupMessage& m) { on_lobby_message(m); };
  cb.on_secure = [this](const membership::View&) { presence_->on_lobby_secure(); };
  cb.on_error = [this](Errc code, const std::string& what) {
    events_.append("venue", json{{"event", "error"}, {"group", config_.lobby_group}, {"code", errc_name(code)},
                                 {"detail", what}});
  };
  lobby_ = &node_->join(config_.lobby_group, contact, cb, runtime_.group);
  // Every contact is probed, so a dead first contact still converges.
  for (const auto& b : config_.bootstrap) lobby_->add_known(b);
  presence_->attach_lobby(lobby_);
  files_->attach_lobby(lobby_);
  index_share_dirs();
}

void Peer::on_lobby_message(const group::GroupMessage& m) {
  auto body = json::parse(m.payload.begin(), m.payload.end(), nullptr, false);
  if (body.is_discarded() || !body.is_object()) return;
  if (presence_->on_lobby_message(m, body)) return;
  files_->on_lobby_message(m, body);
}

void Peer::index_share_dirs() {
  std::map<std::string, std::int64_t> known;
  for (const auto& e : files_->index().entries()) known[e.path.string()] = e.mtime;
  for (const auto& dir : config_.share_dirs) {
    std::error_code ec;
    for (fs::recursive_directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
      if (!it->is_regular_file(ec)) continue;
      auto p = fs::absolute(it->path());
      auto k = known.find(p.string());
      if (k != known.end() && k->second == fileshare::file_mtime(p)) continue;
      auto r = files_->add_share(p, {});
      if (r) events_.append("share", r->to_json());
    }
  }
}

void Peer::save_state() {
  if (!runtime_.persist || !node_) return;
  std::error_code ec;
  fs::create_directories(config_.data_dir, ec);
  auto tmp = config_.data_dir / "pins.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << node_->trust().pins_to_json().dump();
  }
  fs::rename(tmp, config_.data_dir / "pins.json", ec);
}

}  // namespace collab::peerd
