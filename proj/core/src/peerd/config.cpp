#include "collab/peerd/config.hpp"

#include <fstream>
#include <set>

#include "collab/common/error.hpp"

namespace collab::peerd {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(Errc::config, "config field '" + field + "': " + why);
}

const std::set<std::string> kKnown = {"identity_path", "trust_mode",   "roots",          "listen",      "advertise",
                                      "bootstrap",     "lobby_group",  "share_dirs",     "relay_notes", "hits_via_group",
                                      "control_port",  "data_dir",     "download_dir",   "display_name", "location",
                                      "beacon_ms",     "open_shares"};

fs::path resolve(const fs::path& p, const fs::path& base) { return p.is_absolute() ? p : base / p; }

std::string str(const json& doc, const std::string& key) {
  const auto& v = doc.at(key);
  if (!v.is_string()) bad(key, "expected a string");
  return v.get<std::string>();
}

bool flag(const json& doc, const std::string& key, bool dflt) {
  if (!doc.contains(key)) return dflt;
  if (!doc[key].is_boolean()) bad(key, "expected true or false");
  return doc[key].get<bool>();
}

netsim::EndpointAddr addr(const std::string& field, const std::string& text) {
  try {
    return netsim::EndpointAddr::parse(text);
  } catch (const Error& e) {
    bad(field, e.what());
  }
}

std::vector<std::string> strings(const json& doc, const std::string& key) {
  std::vector<std::string> out;
  if (!doc.contains(key)) return out;
  if (!doc[key].is_array()) bad(key, "expected an array of strings");
  for (const auto& v : doc[key]) {
    if (!v.is_string()) bad(key, "expected an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

LoadedConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw Error(Errc::config, "config must be a JSON object");
  LoadedConfig out;
  auto& c = out.config;
  for (const auto& [key, value] : doc.items()) {
    if (kKnown.count(key) == 0) out.warnings.push_back("unknown config key '" + key + "' ignored");
  }
  if (!doc.contains("identity_path")) bad("identity_path", "missing");
  if (!doc.contains("listen")) bad("listen", "missing");
  c.identity_path = resolve(str(doc, "identity_path"), base_dir);
  c.listen = addr("listen", str(doc, "listen"));
  c.advertise = doc.contains("advertise") ? addr("advertise", str(doc, "advertise")) : c.listen;

  if (doc.contains("trust_mode")) {
    auto mode = str(doc, "trust_mode");
    if (mode == "incremental") {
      c.trust_mode = identity::TrustMode::incremental;
    } else if (mode == "registered") {
      c.trust_mode = identity::TrustMode::registered;
    } else {
      bad("trust_mode", "must be \"registered\" or \"incremental\", got \"" + mode + "\"");
    }
  }
  for (const auto& r : strings(doc, "roots")) c.roots.push_back(resolve(r, base_dir));
  if (c.trust_mode == identity::TrustMode::registered && c.roots.empty()) bad("roots", "registered mode needs a root");
  for (const auto& b : strings(doc, "bootstrap")) c.bootstrap.push_back(addr("bootstrap", b));
  if (doc.contains("lobby_group")) {
    c.lobby_group = str(doc, "lobby_group");
    if (c.lobby_group.empty() || c.lobby_group.size() > 255) bad("lobby_group", "must be 1..255 bytes");
  }
  for (const auto& d : strings(doc, "share_dirs")) c.share_dirs.push_back(resolve(d, base_dir));
  c.relay_notes = flag(doc, "relay_notes", false);
  c.hits_via_group = flag(doc, "hits_via_group", false);
  c.open_shares = flag(doc, "open_shares", true);
  if (doc.contains("control_port")) {
    const auto& v = doc["control_port"];
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1 || v.get<std::int64_t>() > 65535) {
      bad("control_port", "expected an integer in 1..65535");
    }
    c.control_port = static_cast<std::uint16_t>(v.get<std::int64_t>());
  }
  c.data_dir = doc.contains("data_dir") ? resolve(str(doc, "data_dir"), base_dir) : c.identity_path.parent_path();
  c.download_dir = doc.contains("download_dir") ? resolve(str(doc, "download_dir"), base_dir) : c.data_dir / "downloads";
  if (doc.contains("display_name")) c.display_name = str(doc, "display_name");
  if (doc.contains("location")) c.location = str(doc, "location");
  if (doc.contains("beacon_ms")) {
    const auto& v = doc["beacon_ms"];
    if (!v.is_number_integer() || v.get<std::int64_t>() < 10) bad("beacon_ms", "expected an integer >= 10");
    c.beacon_ms = v.get<std::int64_t>();
  }
  return out;
}

LoadedConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::config, "cannot read config file " + path.string());
  auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw Error(Errc::config, "config file " + path.string() + " is not valid JSON");
  return parse_config(doc, fs::absolute(path).parent_path());
}

void validate_paths(const PeerConfig& c) {
  std::error_code ec;
  for (const auto& d : c.share_dirs) {
    if (!fs::is_directory(d, ec)) throw Error(Errc::config, "config field 'share_dirs': no directory " + d.string());
  }
  for (const auto& r : c.roots) {
    if (!fs::is_regular_file(r, ec)) throw Error(Errc::config, "config field 'roots': no file " + r.string());
  }
  fs::create_directories(c.data_dir, ec);
  if (ec) throw Error(Errc::config, "config field 'data_dir': " + ec.message());
  fs::create_directories(c.download_dir, ec);
  if (ec) throw Error(Errc::config, "config field 'download_dir': " + ec.message());
}

json PeerConfig::to_json() const {
  json boot = json::array();
  for (const auto& b : bootstrap) boot.push_back(b.to_string());
  json shares = json::array();
  for (const auto& s : share_dirs) shares.push_back(s.string());
  json root_files = json::array();
  for (const auto& r : roots) root_files.push_back(r.string());
  return json{{"identity_path", identity_path.string()},
              {"trust_mode", std::string(identity::trust_mode_name(trust_mode))},
              {"roots", root_files},
              {"listen", listen.to_string()},
              {"advertise", advertise.to_string()},
              {"bootstrap", boot},
              {"lobby_group", lobby_group},
              {"share_dirs", shares},
              {"relay_notes", relay_notes},
              {"hits_via_group", hits_via_group},
              {"control_port", control_port},
              {"data_dir", data_dir.string()},
              {"download_dir", download_dir.string()},
              {"display_name", display_name},
              {"location", location},
              {"beacon_ms", beacon_ms},
              {"open_shares", open_shares}};
}

}  // namespace collab::peerd
