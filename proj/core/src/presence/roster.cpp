#include "collab/presence/roster.hpp"

#include "collab/common/error.hpp"

namespace collab::presence {

using nlohmann::json;

std::string_view availability_name(Availability a) {
  switch (a) {
    case Availability::available: return "AVAILABLE";
    case Availability::away: return "AWAY";
    case Availability::busy: return "BUSY";
    case Availability::offline: return "OFFLINE";
  }
  return "OFFLINE";
}

Availability availability_from(std::string_view name) {
  for (auto a : {Availability::available, Availability::away, Availability::busy, Availability::offline}) {
    if (availability_name(a) == name) return a;
  }
  throw Error(Errc::invalid_argument, "unknown availability '" + std::string(name) + "'");
}

std::string_view visibility_name(Visibility v) { return v == Visibility::public_ ? "PUBLIC" : "PRIVATE"; }

Visibility visibility_from(std::string_view name) {
  if (name == "PUBLIC") return Visibility::public_;
  if (name == "PRIVATE") return Visibility::private_;
  throw Error(Errc::invalid_argument, "unknown visibility '" + std::string(name) + "'");
}

namespace {

json profile_json(const UserProfile& p) {
  json venues = json::array();
  for (const auto& v : p.venues) {
    venues.push_back({{"venue_id", v.venue_id},
                      {"name", v.name},
                      {"visibility", visibility_name(v.visibility)},
                      {"creator", identity::fingerprint_hex(v.creator)},
                      {"created", v.created}});
  }
  return json{{"fingerprint", identity::fingerprint_hex(p.fingerprint)},
              {"display_name", p.display_name},
              {"location", p.location},
              {"availability", availability_name(p.availability)},
              {"venues", venues}};
}

}  // namespace

Bytes PresenceBeacon::tbs_bytes() const {
  auto text = "collab-beacon-v1" + profile_json(profile).dump();
  return Bytes(text.begin(), text.end());
}

void PresenceBeacon::sign(const identity::Identity& id) { signature = id.sign(tbs_bytes()); }

bool PresenceBeacon::verify(const crypto::PublicKey& key) const { return crypto::verify(key, tbs_bytes(), signature); }

json PresenceBeacon::to_json() const {
  auto j = profile_json(profile);
  j["signature"] = to_hex(signature);
  return j;
}

PresenceBeacon PresenceBeacon::from_json(const json& doc) {
  try {
    PresenceBeacon b;
    auto& p = b.profile;
    p.fingerprint = identity::fingerprint_from_hex(doc.at("fingerprint").get<std::string>());
    p.display_name = doc.at("display_name").get<std::string>();
    p.location = doc.value("location", "");
    p.availability = availability_from(doc.at("availability").get<std::string>());
    for (const auto& v : doc.value("venues", json::array())) {
      p.venues.push_back({v.at("venue_id").get<std::string>(), v.at("name").get<std::string>(),
                          visibility_from(v.at("visibility").get<std::string>()),
                          identity::fingerprint_from_hex(v.at("creator").get<std::string>()),
                          v.at("created").get<std::int64_t>()});
    }
    b.signature = array_from_hex<64>(doc.at("signature").get<std::string>());
    return b;
  } catch (const json::exception& e) {
    throw Error(Errc::decode, std::string("malformed beacon: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::decode, std::string("malformed beacon: ") + e.what());
  }
}

json RosterEntry::to_json() const {
  auto j = profile_json(profile);
  j["addr"] = addr.to_string();
  j["last_seen"] = last_seen;
  return j;
}

bool Roster::update(const PresenceBeacon& beacon, const netsim::EndpointAddr& addr, netsim::SimTime now) {
  auto& e = entries_[beacon.profile.fingerprint];
  bool changed = !(e.profile == beacon.profile) || e.addr != addr;
  e.profile = beacon.profile;
  e.addr = addr;
  e.last_seen = now;
  return changed;
}

std::vector<identity::Fingerprint> Roster::expire(netsim::SimTime now, netsim::SimTime threshold) {
  std::vector<identity::Fingerprint> out;
  for (auto& [fp, e] : entries_) {
    if (e.online() && now - e.last_seen > threshold) {
      e.profile.availability = Availability::offline;
      out.push_back(fp);
    }
  }
  return out;
}

const RosterEntry* Roster::find(const identity::Fingerprint& fp) const {
  auto it = entries_.find(fp);
  return it == entries_.end() ? nullptr : &it->second;
}

bool Roster::online(const identity::Fingerprint& fp) const {
  const auto* e = find(fp);
  return e != nullptr && e->online();
}

}  // namespace collab::presence
