#include "collab/presence/venue.hpp"

#include "collab/common/error.hpp"

namespace collab::presence {

using nlohmann::json;

std::string venue_id_of(const identity::Fingerprint& creator, std::string_view name, std::int64_t created) {
  Writer w;
  w.raw(as_bytes("collab-venue-v1"));
  w.raw(creator);
  w.blob16(as_bytes(name));
  w.u64(static_cast<std::uint64_t>(created));
  return to_hex(crypto::sha256(w.bytes()));
}

json Venue::to_json() const {
  json inv = json::array();
  for (const auto& fp : invited) inv.push_back(identity::fingerprint_hex(fp));
  return json{{"venue_id", id},
              {"name", name},
              {"visibility", visibility_name(visibility)},
              {"creator", identity::fingerprint_hex(creator)},
              {"created", created},
              {"invited", inv}};
}

Venue Venue::from_json(const json& doc) {
  try {
    Venue v;
    v.id = doc.at("venue_id").get<std::string>();
    v.name = doc.at("name").get<std::string>();
    v.visibility = visibility_from(doc.at("visibility").get<std::string>());
    v.creator = identity::fingerprint_from_hex(doc.at("creator").get<std::string>());
    v.created = doc.at("created").get<std::int64_t>();
    for (const auto& f : doc.value("invited", json::array())) {
      v.invited.insert(identity::fingerprint_from_hex(f.get<std::string>()));
    }
    if (v.id != venue_id_of(v.creator, v.name, v.created)) throw Error(Errc::decode, "venue id does not match");
    return v;
  } catch (const json::exception& e) {
    throw Error(Errc::decode, std::string("malformed venue: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::decode, std::string("malformed venue: ") + e.what());
  }
}

json ChatMessage::to_json() const {
  return json{{"venue_id", venue_id},
              {"author", identity::fingerprint_hex(author)},
              {"body", body},
              {"epoch", epoch},
              {"ts", ts}};
}

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xe ? 3 : (c >> 3) == 0x1e ? 4 : 0;
    if (len == 0 || i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((static_cast<unsigned char>(s[i + k]) >> 6) != 0x2) return false;
    }
    i += len;
  }
  return true;
}

}  // namespace

void validate_body(std::string_view body) {
  if (body.empty()) throw Error(Errc::invalid_argument, "empty message body");
  if (body.size() > kMaxChatBody) throw Error(Errc::oversize, "message body exceeds 4 KiB");
  if (!valid_utf8(body)) throw Error(Errc::invalid_argument, "message body is not UTF-8");
}

}  // namespace collab::presence
