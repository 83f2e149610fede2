#include "collab/presence/presence.hpp"

#include <chrono>

namespace collab::presence {

using nlohmann::json;

namespace {

Bytes dump(const json& j) {
  auto s = j.dump();
  return Bytes(s.begin(), s.end());
}

std::optional<json> parse(ByteView b) {
  auto j = json::parse(b.begin(), b.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

}  // namespace

Presence::Presence(group::Node& node, const identity::PolicyEngine& policy, PresenceOptions options,
                   EventSink events)
    : node_(node),
      policy_(policy),
      opt_(std::move(options)),
      events_(std::move(events)),
      store_(opt_.note_store, opt_.relay_cap) {
  if (opt_.display_name.empty()) opt_.display_name = me().cert.subject;
  node_.on_p2p("invite", [this](const group::P2PMessage& m) { on_invite(m); });
  node_.on_p2p("invite-ack", [this](const group::P2PMessage& m) {
    auto j = parse(m.payload);
    if (!j) return;
    auto id = j->value("venue_id", "");
    if (auto it = pending_invites_.find(id); it != pending_invites_.end()) it->second.erase(m.sender.fingerprint());
  });
  node_.on_p2p("note", [this](const group::P2PMessage& m) { on_note(m, false); });
  node_.on_p2p("note-relay", [this](const group::P2PMessage& m) { on_note(m, true); });
  node_.on_p2p("note-ack", [this](const group::P2PMessage& m) { on_note_ack(m); });
  arm_beacon();
}

Presence::~Presence() {
  if (beacon_timer_) node_.transport().cancel(*beacon_timer_);
}

std::int64_t Presence::wall() const {
  if (opt_.wall_clock) return opt_.wall_clock();
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void Presence::emit(const std::string& kind, const json& payload) {
  if (events_) events_(kind, payload);
}

void Presence::attach_lobby(group::GroupSession* lobby) { lobby_ = lobby; }

void Presence::on_lobby_secure() { send_beacon(); }

UserProfile Presence::profile() const {
  UserProfile p;
  p.fingerprint = me().fingerprint();
  p.display_name = opt_.display_name;
  p.location = opt_.location;
  p.availability = availability_;
  for (const auto& [id, j] : joined_) {
    if (j.venue.visibility == Visibility::public_) p.venues.push_back({id, j.venue.name, j.venue.visibility, j.venue.creator, j.venue.created});
  }
  return p;
}

void Presence::set_status(Availability a, std::optional<std::string> location) {
  if (a == Availability::offline) throw Error(Errc::invalid_argument, "OFFLINE is derived from beacon expiry");
  availability_ = a;
  if (location) opt_.location = std::move(*location);
  send_beacon();
}

// --------------------------------------------------------------- beacons

void Presence::arm_beacon() {
  beacon_timer_ = node_.transport().schedule(opt_.beacon_ms, [this] {
    beacon_timer_.reset();
    beacon_tick();
    arm_beacon();
  });
}

void Presence::beacon_tick() {
  for (const auto& fp : roster_.expire(now(), opt_.offline_after * opt_.beacon_ms)) {
    emit("roster", roster_.find(fp)->to_json());
  }
  send_beacon();
}

void Presence::send_beacon() {
  if (lobby_ == nullptr || !lobby_->secure()) return;
  PresenceBeacon b;
  b.profile = profile();
  b.sign(me());
  if (lobby_->multicast(dump(json{{"t", "beacon"}, {"beacon", b.to_json()}}), ordcast::Mode::fifo)) {
    ++stats_.beacons_sent;
  }
}

bool Presence::on_lobby_message(const group::GroupMessage& m, const json& body) {
  if (body.value("t", "") != "beacon") return false;
  if (m.sender.fingerprint == me().fingerprint()) return true;  // the roster lists others
  PresenceBeacon b;
  try {
    b = PresenceBeacon::from_json(body.at("beacon"));
  } catch (const std::exception&) {
    ++stats_.beacons_rejected;
    ++roster_.rejected;
    return true;
  }
  const auto* cert = node_.cert_of(m.sender.fingerprint);
  if (b.profile.fingerprint != m.sender.fingerprint || cert == nullptr || !b.verify(cert->public_key)) {
    ++stats_.beacons_rejected;
    ++roster_.rejected;
    return true;
  }
  ++stats_.beacons_accepted;
  const auto* before = roster_.find(b.profile.fingerprint);
  bool was_online = before != nullptr && before->online();
  if (roster_.update(b, m.sender.addr, now()) || !was_online) {
    emit("roster", roster_.find(b.profile.fingerprint)->to_json());
  }
  for (const auto& ad : b.profile.venues) {
    if (ad.visibility != Visibility::public_ || joined_.count(ad.venue_id) != 0) continue;
    if (venue_id_of(ad.creator, ad.name, ad.created) != ad.venue_id) continue;
    auto& offer = offers_[ad.venue_id];
    bool fresh = offer.venue.id.empty();
    if (fresh || !offer.invitation) {
      offer.venue.id = ad.venue_id;
      offer.venue.name = ad.name;
      offer.venue.visibility = Visibility::public_;
      offer.venue.creator = ad.creator;
      offer.venue.created = ad.created;
      offer.contact = m.sender.addr;
    }
    if (fresh) emit("venue", json{{"event", "advertised"}, {"venue_id", ad.venue_id}, {"name", ad.name}});
  }
  if (b.profile.fingerprint != me().fingerprint()) on_peer_seen(b.profile.fingerprint);
  return true;
}

Status Presence::send_to_peer(const identity::Fingerprint& fp, const std::string& service, const json& body) {
  const auto* entry = roster_.find(fp);
  const auto* cert = node_.cert_of(fp);
  if (entry == nullptr || cert == nullptr) return Error(Errc::unreachable, "peer not in roster");
  return node_.send_p2p(entry->addr, *cert, service, dump(body));
}

void Presence::on_peer_seen(const identity::Fingerprint& fp) {
  const auto* entry = roster_.find(fp);
  if (entry == nullptr || !entry->online()) return;
  auto due = [&](Outreach& o) {
    if (o.last >= 0 && now() - o.last < opt_.beacon_ms) return false;
    o.last = now();
    return true;
  };
  for (const auto& [venue_id, who] : pending_invites_) {
    if (who.count(fp) == 0) continue;
    auto jt = joined_.find(venue_id);
    if (jt == joined_.end()) continue;
    if (!due(invite_tx_[{venue_id, fp}])) continue;
    (void)send_to_peer(fp, "invite",
                       json{{"venue", jt->second.venue.to_json()}, {"contact", node_.pid().addr.to_string()}});
  }
  for (const auto& [id, h] : store_.held()) {
    if (h.delivered) continue;
    if (h.note.recipient == fp) {
      if (due(note_tx_[{id, fp}])) attempt_note(h, *entry, false);
    } else if (!h.relayed && relay_acks_[id].count(fp) == 0) {
      if (due(note_tx_[{id, fp}])) attempt_note(h, *entry, true);
    }
  }
}

// ---------------------------------------------------------------- venues

Result<Venue> Presence::create_venue(const std::string& name, Visibility visibility) {
  if (name.empty() || name.size() > 100) return Error(Errc::invalid_argument, "venue name must be 1..100 bytes");
  auto decision = policy_.authorize("venue:create", me().cert.subject);
  if (!decision.allow) return Error(Errc::denied, decision.reason);
  Venue v;
  v.name = name;
  v.visibility = visibility;
  v.creator = me().fingerprint();
  v.created = wall();
  v.id = venue_id_of(v.creator, v.name, v.created);
  while (joined_.count(v.id) != 0) v.id = venue_id_of(v.creator, v.name, ++v.created);
  open_venue(v, std::nullopt);
  emit("venue", json{{"event", "created"}, {"venue", v.to_json()}});
  if (visibility == Visibility::public_) send_beacon();
  return v;
}

void Presence::open_venue(const Venue& v, std::optional<netsim::EndpointAddr> contact) {
  auto& j = joined_[v.id];
  j.venue = v;
  const std::string id = v.id;
  group::GroupCallbacks cb;
  cb.on_view = [this, id](const membership::View& view) { on_venue_view(id, view); };
  cb.on_message = [this, id](const group::GroupMessage& m) { on_venue_message(id, m); };
  cb.on_error = [this, id](Errc code, const std::string& what) {
    emit("venue", json{{"event", "error"}, {"venue_id", id}, {"code", errc_name(code)}, {"detail", what}});
  };
  auto opts = opt_.venue_group;
  opts.admit = [this, id](const membership::ProcessId& pid, const identity::IdentityCert&) {
    auto it = joined_.find(id);
    return it != joined_.end() && it->second.venue.admits(pid.fingerprint);
  };
  j.session = &node_.join(v.group(), contact, cb, opts);
  offers_.erase(v.id);
}

void Presence::on_venue_view(const std::string& venue_id, const membership::View& view) {
  auto it = joined_.find(venue_id);
  if (it == joined_.end()) return;
  json members = json::array();
  for (const auto& m : view.members) members.push_back(identity::fingerprint_hex(m.fingerprint));
  emit("venue", json{{"event", "view"}, {"venue_id", venue_id}, {"epoch", view.epoch()}, {"members", members}});
  // The smallest member re-announces the venue so joiners learn its state.
  if (view.members.size() > 1 && view.members.front() == node_.pid()) publish_meta(venue_id);
}

void Presence::publish_meta(const std::string& venue_id) {
  auto it = joined_.find(venue_id);
  if (it == joined_.end() || it->second.session == nullptr) return;
  (void)it->second.session->multicast(dump(json{{"t", "meta"}, {"venue", it->second.venue.to_json()}}),
                                      ordcast::Mode::agreed);
}

void Presence::merge_meta(Venue& mine, const Venue& theirs) {
  if (mine.creator == identity::Fingerprint{}) {
    mine.creator = theirs.creator;
    mine.created = theirs.created;
    mine.name = theirs.name;
  }
  if (theirs.visibility == Visibility::public_) mine.visibility = Visibility::public_;
  mine.invited.insert(theirs.invited.begin(), theirs.invited.end());
}

void Presence::on_venue_message(const std::string& venue_id, const group::GroupMessage& m) {
  auto it = joined_.find(venue_id);
  if (it == joined_.end()) return;
  auto body = parse(m.payload);
  if (!body) return;
  auto t = body->value("t", "");
  if (t == "chat") {
    ChatMessage c;
    c.venue_id = venue_id;
    c.author = m.sender.fingerprint;
    c.body = body->value("body", "");
    c.epoch = m.view.epoch;
    c.ts = m.ts;
    it->second.transcript.push_back(c);
    emit("message", c.to_json());
  } else if (t == "meta") {
    try {
      auto theirs = Venue::from_json(body->at("venue"));
      if (theirs.id != venue_id) return;
      auto before = it->second.venue.to_json();
      merge_meta(it->second.venue, theirs);
      if (it->second.venue.to_json() != before) {
        emit("venue", json{{"event", "updated"}, {"venue", it->second.venue.to_json()}});
        if (it->second.venue.visibility == Visibility::public_) send_beacon();
      }
    } catch (const std::exception&) {
    }
  }
}

Result<Venue> Presence::invite(const std::string& venue_id, const identity::Fingerprint& who) {
  auto it = joined_.find(venue_id);
  if (it == joined_.end()) return Error(Errc::not_member, "not a member of venue " + venue_id);
  auto& v = it->second.venue;
  bool fresh = v.invited.insert(who).second;
  if (fresh) {
    publish_meta(venue_id);
    pending_invites_[venue_id].insert(who);
    emit("venue", json{{"event", "invited"}, {"venue", v.to_json()}, {"invitee", identity::fingerprint_hex(who)}});
    on_peer_seen(who);
  }
  return v;
}

Result<Venue> Presence::make_public(const std::string& venue_id) {
  auto it = joined_.find(venue_id);
  if (it == joined_.end()) return Error(Errc::not_member, "not a member of venue " + venue_id);
  auto& v = it->second.venue;
  if (v.visibility == Visibility::public_) return v;
  v.visibility = Visibility::public_;
  publish_meta(venue_id);
  emit("venue", json{{"event", "public"}, {"venue", v.to_json()}});
  send_beacon();
  return v;
}

Status Presence::join_venue(const std::string& venue_id) {
  if (joined_.count(venue_id) != 0) return ok_status();
  auto it = offers_.find(venue_id);
  if (it == offers_.end()) return Error(Errc::not_found, "no invitation or advert for venue " + venue_id);
  auto offer = it->second;
  if (offer.venue.visibility != Visibility::public_ && !offer.venue.admits(me().fingerprint())) {
    return Error(Errc::denied, "venue is private and we are not invited");
  }
  open_venue(offer.venue, offer.contact);
  emit("venue", json{{"event", "joined"}, {"venue", offer.venue.to_json()}});
  return ok_status();
}

Status Presence::leave_venue(const std::string& venue_id) {
  auto it = joined_.find(venue_id);
  if (it == joined_.end()) return Error(Errc::not_member, "not a member of venue " + venue_id);
  auto group = it->second.venue.group();
  joined_.erase(it);
  (void)node_.leave(group);
  emit("venue", json{{"event", "left"}, {"venue_id", venue_id}});
  send_beacon();
  return ok_status();
}

Status Presence::post_message(const std::string& venue_id, const std::string& body) {
  auto it = joined_.find(venue_id);
  if (it == joined_.end()) return Error(Errc::not_member, "not a member of venue " + venue_id);
  try {
    validate_body(body);
  } catch (const Error& e) {
    return e;
  }
  return it->second.session->multicast(dump(json{{"t", "chat"}, {"body", body}}), ordcast::Mode::agreed);
}

std::vector<Venue> Presence::venues() const {
  std::vector<Venue> out;
  for (const auto& [id, j] : joined_) out.push_back(j.venue);
  return out;
}

std::vector<VenueOffer> Presence::offers() const {
  std::vector<VenueOffer> out;
  for (const auto& [id, o] : offers_) out.push_back(o);
  return out;
}

const Venue* Presence::venue(const std::string& venue_id) const {
  auto it = joined_.find(venue_id);
  return it == joined_.end() ? nullptr : &it->second.venue;
}

group::GroupSession* Presence::venue_session(const std::string& venue_id) const {
  auto it = joined_.find(venue_id);
  return it == joined_.end() ? nullptr : it->second.session;
}

const std::vector<ChatMessage>* Presence::transcript(const std::string& venue_id) const {
  auto it = joined_.find(venue_id);
  return it == joined_.end() ? nullptr : &it->second.transcript;
}

void Presence::on_invite(const group::P2PMessage& m) {
  auto j = parse(m.payload);
  if (!j) return;
  try {
    auto v = Venue::from_json(j->at("venue"));
    if (!v.admits(me().fingerprint())) return;
    (void)node_.send_p2p(m.from, m.sender, "invite-ack", dump(json{{"venue_id", v.id}}));
    if (joined_.count(v.id) != 0) return;
    bool fresh = offers_.count(v.id) == 0 || !offers_[v.id].invitation;
    offers_[v.id] = VenueOffer{v, m.from, true};
    if (fresh) {
      emit("venue", json{{"event", "invitation"},
                         {"venue", v.to_json()},
                         {"from", identity::fingerprint_hex(m.sender.fingerprint())}});
    }
  } catch (const std::exception&) {
  }
}

// ----------------------------------------------------------------- notes

Result<Note> Presence::leave_note(const identity::Fingerprint& recipient, const std::string& body) {
  auto decision = policy_.authorize("note:leave", me().cert.subject);
  if (!decision.allow) return Error(Errc::denied, decision.reason);
  try {
    validate_body(body);
  } catch (const Error& e) {
    return e;
  }
  auto note = Note::make(me(), recipient, body, wall());
  store_.hold(note, false);
  emit("note", json{{"event", "held"}, {"note", note.to_json()}});
  if (recipient == me().fingerprint()) {
    if (store_.receive(note)) {
      ++stats_.notes_surfaced;
      emit("note", json{{"event", "received"}, {"note", note.to_json()}});
    }
    store_.mark_delivered(note.id);
    emit("note", json{{"event", "delivered"}, {"note_id", note.id}});
    return note;
  }
  for (const auto& [fp, e] : roster_.entries()) {
    if (fp != me().fingerprint()) on_peer_seen(fp);
  }
  return note;
}

void Presence::attempt_note(const NoteStore::Held& h, const RosterEntry& to, bool as_relay_copy) {
  const auto* cert = node_.cert_of(to.profile.fingerprint);
  if (cert == nullptr) return;
  if (node_.send_p2p(to.addr, *cert, as_relay_copy ? "note-relay" : "note", dump(h.note.to_json()))) {
    ++stats_.notes_sent;
  }
}

void Presence::on_note(const group::P2PMessage& m, bool relay_copy) {
  auto j = parse(m.payload);
  if (!j) return;
  Note note;
  try {
    note = Note::from_json(*j);
  } catch (const std::exception&) {
    return;
  }
  if (!note.valid()) return;
  json ack{{"note_id", note.id}, {"role", relay_copy ? "relay" : "recipient"}};
  if (relay_copy) {
    bool stored = false;
    if (opt_.relay_notes && note.recipient != me().fingerprint()) {
      std::optional<std::string> evicted;
      stored = store_.hold(note, true, &evicted) || store_.held().count(note.id) != 0;
      if (evicted) emit("note", json{{"event", "evicted"}, {"note_id", *evicted}});
    }
    ack["stored"] = stored;
  } else {
    if (note.recipient != me().fingerprint()) return;
    if (store_.receive(note)) {
      ++stats_.notes_surfaced;
      emit("note", json{{"event", "received"}, {"note", note.to_json()}});
    } else {
      ++stats_.note_duplicates;
    }
  }
  (void)node_.send_p2p(m.from, m.sender, "note-ack", dump(ack));
}

void Presence::on_note_ack(const group::P2PMessage& m) {
  auto j = parse(m.payload);
  if (!j) return;
  auto id = j->value("note_id", "");
  auto it = store_.held().find(id);
  if (it == store_.held().end()) return;
  if (j->value("role", "") == "recipient") {
    if (m.sender.fingerprint() != it->second.note.recipient || it->second.delivered) return;
    store_.mark_delivered(id);
    emit("note", json{{"event", "delivered"}, {"note_id", id}});
  } else {
    relay_acks_[id].insert(m.sender.fingerprint());
  }
}

}  // namespace collab::presence
