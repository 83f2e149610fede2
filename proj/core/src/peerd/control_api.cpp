#include "collab/peerd/control_api.hpp"

#include <charconv>

namespace collab::peerd {

using nlohmann::json;

namespace {

ApiResponse error(int status, const std::string& code, const std::string& detail) {
  return {status, json{{"error", code}, {"detail", detail}}};
}

ApiResponse from_error(const Error& e) {
  return error(http_status_for(e.code()), std::string(errc_name(e.code())), e.what());
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    auto next = path.find('/', pos);
    if (next == std::string::npos) next = path.size();
    if (next > pos) parts.push_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return parts;
}

std::string need_string(const json& body, const std::string& key) {
  if (!body.contains(key) || !body[key].is_string()) throw Error(Errc::invalid_argument, "field '" + key + "' required");
  return body[key].get<std::string>();
}

std::uint64_t to_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw Error(Errc::invalid_argument, "bad " + what);
  return v;
}

template <std::size_t N>
std::array<std::uint8_t, N> hex_field(const std::string& text, const std::string& what) {
  try {
    return array_from_hex<N>(text);
  } catch (const std::exception&) {
    throw Error(Errc::invalid_argument, "bad " + what);
  }
}

json venue_view(presence::Presence& p, const presence::Venue& v) {
  auto j = v.to_json();
  j["joined"] = p.joined(v.id);
  if (auto* s = p.venue_session(v.id); s != nullptr && s->view()) {
    json members = json::array();
    for (const auto& m : s->view()->members) members.push_back(identity::fingerprint_hex(m.fingerprint));
    j["members"] = members;
  }
  return j;
}

}  // namespace

int http_status_for(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::denied: return 403;
    case Errc::not_member:
    case Errc::not_in_view:
    case Errc::precondition:
    case Errc::stale:
    case Errc::untrusted: return 409;
    default: return 400;
  }
}

ApiResponse ControlApi::handle(const ApiRequest& req) {
  auto parts = split_path(req.path);
  if (parts.size() < 2 || parts[0] != "api") return error(404, "not_found", "no such resource");
  json body;
  if (req.method == "POST" && !req.body.empty()) {
    body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) return error(400, "decode", "request body must be a JSON object");
  } else if (req.method == "POST") {
    body = json::object();
  }
  try {
    return route(req, parts, body);
  } catch (const Error& e) {
    return from_error(e);
  } catch (const json::exception& e) {
    return error(400, "decode", e.what());
  }
}

ApiResponse ControlApi::route(const ApiRequest& req, const std::vector<std::string>& parts, const json& body) {
  auto& pres = peer_.presence();
  auto& files = peer_.files();
  const auto& res = parts[1];
  bool get = req.method == "GET";
  bool post = req.method == "POST";
  auto method_not_allowed = [] { return error(405, "method", "method not allowed"); };

  if (res == "self" && parts.size() == 2) {
    if (post) {
      auto a = presence::availability_from(body.value("availability", "AVAILABLE"));
      std::optional<std::string> loc;
      if (body.contains("location")) loc = need_string(body, "location");
      pres.set_status(a, loc);
    } else if (!get) {
      return method_not_allowed();
    }
    auto p = pres.profile();
    json venues = json::array();
    for (const auto& v : p.venues) venues.push_back({{"venue_id", v.venue_id}, {"name", v.name}});
    return {200, json{{"fingerprint", identity::fingerprint_hex(p.fingerprint)},
                      {"subject", peer_.node().identity().cert.subject},
                      {"display_name", p.display_name},
                      {"location", p.location},
                      {"availability", std::string(presence::availability_name(p.availability))},
                      {"addr", peer_.node().transport().local_addr().to_string()},
                      {"venues", venues}}};
  }

  if (res == "roster" && parts.size() == 2) {
    if (!get) return method_not_allowed();
    json out = json::array();
    for (const auto& [fp, e] : pres.roster().entries()) out.push_back(e.to_json());
    return {200, out};
  }

  if (res == "venues") {
    if (parts.size() == 2) {
      if (post) {
        auto vis = presence::visibility_from(body.value("visibility", "PRIVATE"));
        auto v = pres.create_venue(need_string(body, "name"), vis);
        if (!v) return from_error(v.error());
        return {201, venue_view(pres, *v)};
      }
      if (!get) return method_not_allowed();
      json out = json::array();
      for (const auto& v : pres.venues()) out.push_back(venue_view(pres, v));
      for (const auto& o : pres.offers()) {
        auto j = o.venue.to_json();
        j["joined"] = false;
        j["invitation"] = o.invitation;
        j["contact"] = o.contact.to_string();
        out.push_back(j);
      }
      return {200, out};
    }
    const auto& id = parts[2];
    if (parts.size() == 3) {
      if (!get) return method_not_allowed();
      if (const auto* v = pres.venue(id)) return {200, venue_view(pres, *v)};
      return error(404, "not_found", "unknown venue");
    }
    if (parts.size() != 4) return error(404, "not_found", "no such resource");
    const auto& action = parts[3];
    if (action == "messages") {
      if (post) {
        auto text = need_string(body, "body");
        if (pres.venue(id) == nullptr && !pres.joined(id)) {
          bool offered = false;
          for (const auto& o : pres.offers()) offered = offered || o.venue.id == id;
          if (!offered) return error(404, "not_found", "unknown venue");
        }
        if (auto st = pres.post_message(id, text); !st) return from_error(st.error());
        return {202, json{{"venue_id", id},
                          {"author", identity::fingerprint_hex(peer_.node().identity().fingerprint())},
                          {"body", text}}};
      }
      if (!get) return method_not_allowed();
      const auto* t = pres.transcript(id);
      if (t == nullptr) return error(pres.venue(id) ? 409 : 404, "not_member", "venue not joined");
      json out = json::array();
      for (const auto& m : *t) out.push_back(m.to_json());
      return {200, out};
    }
    if (!post) return method_not_allowed();
    if (action == "invite") {
      auto fp = hex_field<32>(need_string(body, "fingerprint"), "fingerprint");
      auto v = pres.invite(id, fp);
      if (!v) return from_error(v.error());
      return {200, venue_view(pres, *v)};
    }
    if (action == "public") {
      auto v = pres.make_public(id);
      if (!v) return from_error(v.error());
      return {200, venue_view(pres, *v)};
    }
    if (action == "join") {
      if (auto st = pres.join_venue(id); !st) return from_error(st.error());
      const auto* v = pres.venue(id);
      return {200, v ? venue_view(pres, *v) : json{{"venue_id", id}, {"joined", true}}};
    }
    if (action == "leave") {
      if (auto st = pres.leave_venue(id); !st) return from_error(st.error());
      return {200, json{{"venue_id", id}, {"joined", false}}};
    }
    return error(404, "not_found", "no such resource");
  }

  if (res == "notes" && parts.size() == 2) {
    if (post) {
      auto fp = hex_field<32>(need_string(body, "recipient"), "recipient");
      auto n = pres.leave_note(fp, need_string(body, "body"));
      if (!n) return from_error(n.error());
      return {201, n->to_json()};
    }
    if (!get) return method_not_allowed();
    json inbox = json::array();
    for (const auto& n : pres.notes().inbox()) inbox.push_back(n.to_json());
    json held = json::array();
    for (const auto& [id, h] : pres.notes().held()) {
      auto j = h.note.to_json();
      j["relayed"] = h.relayed;
      j["delivered"] = h.delivered;
      held.push_back(j);
    }
    return {200, json{{"inbox", inbox}, {"held", held}}};
  }

  if (res == "shares" && parts.size() == 2) {
    if (post) {
      std::set<std::string> tags;
      if (body.contains("tags")) {
        for (const auto& t : body.at("tags")) tags.insert(t.get<std::string>());
      }
      auto e = files.add_share(need_string(body, "path"), tags);
      if (!e) return from_error(e.error());
      auto j = e->to_json();
      peer_.events().append("share", j);
      return {201, j};
    }
    if (!get) return method_not_allowed();
    json out = json::array();
    for (const auto& e : files.index().entries()) out.push_back(e.to_json());
    return {200, out};
  }

  if (res == "search") {
    if (parts.size() == 2) {
      if (!post) return method_not_allowed();
      auto q = files.issue_query(need_string(body, "q"));
      if (!q) return from_error(q.error());
      return {201, json{{"query_id", to_hex(*q)}}};
    }
    if (parts.size() == 4 && parts[3] == "hits") {
      if (!get) return method_not_allowed();
      const auto* hits = files.hits(hex_field<16>(parts[2], "query id"));
      if (hits == nullptr) return error(404, "not_found", "unknown query");
      json out = json::array();
      for (const auto& h : *hits) out.push_back(h.to_json());
      return {200, out};
    }
    return error(404, "not_found", "no such resource");
  }

  if (res == "transfers") {
    if (parts.size() == 3) {
      if (!get) return method_not_allowed();
      const auto* j = files.job(to_u64(parts[2], "transfer id"));
      if (j == nullptr) return error(404, "not_found", "unknown transfer");
      return {200, j->to_json()};
    }
    if (parts.size() != 2) return error(404, "not_found", "no such resource");
    if (post) {
      auto qid = hex_field<16>(need_string(body, "query_id"), "query_id");
      auto eid = hex_field<32>(need_string(body, "entry_id"), "entry_id");
      std::optional<identity::Fingerprint> responder;
      if (body.contains("responder")) responder = hex_field<32>(need_string(body, "responder"), "responder");
      const auto* hits = files.hits(qid);
      if (hits == nullptr) return error(404, "not_found", "unknown query");
      const fileshare::HitEntry* chosen = nullptr;
      for (const auto& h : *hits) {
        if (responder && h.responder != *responder) continue;
        for (const auto& e : h.entries) {
          if (e.entry_id == eid && chosen == nullptr) chosen = &e;
        }
      }
      if (chosen == nullptr) return error(404, "not_found", "no such hit");
      auto dest = body.contains("dest") ? std::filesystem::path(need_string(body, "dest"))
                                        : peer_.config().download_dir / chosen->name;
      auto id = files.fetch(*chosen, dest);
      if (!id) return from_error(id.error());
      return {201, files.job(*id)->to_json()};
    }
    if (!get) return method_not_allowed();
    json out = json::array();
    for (const auto& j : files.jobs()) out.push_back(j.to_json());
    return {200, out};
  }

  if (res == "events" && parts.size() == 2) {
    if (!get) return method_not_allowed();
    std::uint64_t since = 0;
    std::size_t max = 1000;
    if (auto it = req.query.find("since"); it != req.query.end()) since = to_u64(it->second, "since");
    if (auto it = req.query.find("max"); it != req.query.end()) max = to_u64(it->second, "max");
    json out = json::array();
    std::uint64_t next = since;
    for (const auto& e : peer_.events().since(since, max)) {
      out.push_back(e.to_json());
      next = e.seq;
    }
    return {200, json{{"events", out}, {"next", next}}};
  }

  return error(404, "not_found", "no such resource");
}

}  // namespace collab::peerd
