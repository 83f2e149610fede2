#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "collab/identity/cert.hpp"
#include "collab/netsim/address.hpp"

namespace collab::presence {

enum class Availability { available, away, busy, offline };
std::string_view availability_name(Availability a);
Availability availability_from(std::string_view name);  // throws invalid_argument

enum class Visibility { public_, private_ };
std::string_view visibility_name(Visibility v);
Visibility visibility_from(std::string_view name);

struct VenueAdvert {
  std::string venue_id;  // hex
  std::string name;
  Visibility visibility = Visibility::public_;
  identity::Fingerprint creator{};  // with created, lets joiners check venue_id
  std::int64_t created = 0;

  bool operator==(const VenueAdvert&) const = default;
};

struct UserProfile {
  identity::Fingerprint fingerprint{};
  std::string display_name;
  std::string location;
  Availability availability = Availability::available;
  std::vector<VenueAdvert> venues;

  bool operator==(const UserProfile&) const = default;
};

// A profile signed by its owner. Travels sealed inside the lobby group.
struct PresenceBeacon {
  UserProfile profile;
  crypto::Signature signature{};

  Bytes tbs_bytes() const;
  void sign(const identity::Identity& id);
  bool verify(const crypto::PublicKey& key) const;

  nlohmann::json to_json() const;
  static PresenceBeacon from_json(const nlohmann::json& doc);  // throws decode
};

struct RosterEntry {
  UserProfile profile;  // availability is OFFLINE once expired
  netsim::EndpointAddr addr;
  netsim::SimTime last_seen = 0;
  bool online() const { return profile.availability != Availability::offline; }

  nlohmann::json to_json() const;
};

class Roster {
 public:
  // Upserts a verified beacon. Returns true when something visible changed.
  bool update(const PresenceBeacon& beacon, const netsim::EndpointAddr& addr, netsim::SimTime now);
  // Marks entries silent for more than `threshold` OFFLINE; returns them.
  std::vector<identity::Fingerprint> expire(netsim::SimTime now, netsim::SimTime threshold);

  const RosterEntry* find(const identity::Fingerprint& fp) const;
  bool online(const identity::Fingerprint& fp) const;
  const std::map<identity::Fingerprint, RosterEntry>& entries() const { return entries_; }

  std::uint64_t rejected = 0;  // forged or malformed beacons, counted by the owner

 private:
  std::map<identity::Fingerprint, RosterEntry> entries_;
};

}  // namespace collab::presence
