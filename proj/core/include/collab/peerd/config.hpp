#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "collab/identity/trust.hpp"
#include "collab/netsim/address.hpp"

namespace collab::peerd {

// Defaults:
//   trust_mode      "incremental"
//   roots           []            root certificate files (registered mode)
//   bootstrap       []            empty: ad hoc, singleton lobby
//   lobby_group     "lobby"
//   share_dirs      []
//   relay_notes     false
//   hits_via_group  false
//   control_port    7777
//   data_dir        directory of identity_path
//   download_dir    <data_dir>/downloads
//   advertise       listen
//   display_name    certificate subject
//   location        ""
//   beacon_ms       2000
//   open_shares     true          every trusted peer may read shared files
// identity_path and listen are required. Relative paths resolve against the
// directory holding the config file.
struct PeerConfig {
  std::filesystem::path identity_path;
  identity::TrustMode trust_mode = identity::TrustMode::incremental;
  std::vector<std::filesystem::path> roots;
  netsim::EndpointAddr listen;
  netsim::EndpointAddr advertise;
  std::vector<netsim::EndpointAddr> bootstrap;
  std::string lobby_group = "lobby";
  std::vector<std::filesystem::path> share_dirs;
  bool relay_notes = false;
  bool hits_via_group = false;
  std::uint16_t control_port = 7777;
  std::filesystem::path data_dir;
  std::filesystem::path download_dir;
  std::string display_name;
  std::string location;
  std::int64_t beacon_ms = 2000;
  bool open_shares = true;

  nlohmann::json to_json() const;
};

struct LoadedConfig {
  PeerConfig config;
  std::vector<std::string> warnings;  // unknown keys
};

// CONFIG errors name the offending field.
LoadedConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
LoadedConfig load_config(const std::filesystem::path& path);

// Startup checks on paths: share dirs exist, data dir is creatable.
void validate_paths(const PeerConfig& config);

}  // namespace collab::peerd
