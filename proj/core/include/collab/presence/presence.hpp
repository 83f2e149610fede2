#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "collab/common/event_sink.hpp"
#include "collab/group/node.hpp"
#include "collab/identity/policy.hpp"
#include "collab/presence/notes.hpp"
#include "collab/presence/roster.hpp"
#include "collab/presence/venue.hpp"

namespace collab::presence {

struct PresenceOptions {
  std::string display_name;
  std::string location;
  netsim::SimTime beacon_ms = 2000;
  int offline_after = 3;  // beacon intervals
  bool relay_notes = false;
  std::size_t relay_cap = 1000;
  std::optional<std::filesystem::path> note_store;
  group::GroupOptions venue_group;
  std::function<std::int64_t()> wall_clock;  // timestamps on venues and notes
};

// What a peer can see of a venue it might join: public adverts from beacons
// and invitations addressed to it.
struct VenueOffer {
  Venue venue;
  netsim::EndpointAddr contact;
  bool invitation = false;
};

class Presence {
 public:
  Presence(group::Node& node, const identity::PolicyEngine& policy, PresenceOptions options, EventSink events);
  ~Presence();
  Presence(const Presence&) = delete;
  Presence& operator=(const Presence&) = delete;

  // The lobby session carries beacons; the owner routes lobby messages here.
  void attach_lobby(group::GroupSession* lobby);
  // True when the payload was a presence message.
  bool on_lobby_message(const group::GroupMessage& m, const nlohmann::json& body);
  void on_lobby_secure();

  void set_status(Availability a, std::optional<std::string> location = std::nullopt);
  const Roster& roster() const { return roster_; }
  UserProfile profile() const;

  Result<Venue> create_venue(const std::string& name, Visibility visibility);
  Result<Venue> invite(const std::string& venue_id, const identity::Fingerprint& who);
  Result<Venue> make_public(const std::string& venue_id);
  Status join_venue(const std::string& venue_id);
  Status leave_venue(const std::string& venue_id);
  Status post_message(const std::string& venue_id, const std::string& body);

  std::vector<Venue> venues() const;  // joined
  std::vector<VenueOffer> offers() const;
  const Venue* venue(const std::string& venue_id) const;
  bool joined(const std::string& venue_id) const { return joined_.count(venue_id) != 0; }
  group::GroupSession* venue_session(const std::string& venue_id) const;
  const std::vector<ChatMessage>* transcript(const std::string& venue_id) const;

  Result<Note> leave_note(const identity::Fingerprint& recipient, const std::string& body);
  const NoteStore& notes() const { return store_; }

  struct Stats {
    std::uint64_t beacons_sent = 0;
    std::uint64_t beacons_accepted = 0;
    std::uint64_t beacons_rejected = 0;
    std::uint64_t notes_sent = 0;
    std::uint64_t notes_surfaced = 0;
    std::uint64_t note_duplicates = 0;
  };
  const Stats& stats() const { return stats_; }

 private:
  struct Joined {
    Venue venue;
    group::GroupSession* session = nullptr;
    std::vector<ChatMessage> transcript;
  };
  struct Outreach {
    netsim::SimTime last = -1;
  };

  std::int64_t wall() const;
  netsim::SimTime now() const { return node_.transport().now(); }
  const identity::Identity& me() const { return node_.identity(); }
  void emit(const std::string& kind, const nlohmann::json& payload);
  void arm_beacon();
  void beacon_tick();
  void send_beacon();
  void on_peer_seen(const identity::Fingerprint& fp);
  void attempt_note(const NoteStore::Held& h, const RosterEntry& to, bool as_relay_copy);
  Status send_to_peer(const identity::Fingerprint& fp, const std::string& service, const nlohmann::json& body);

  void open_venue(const Venue& v, std::optional<netsim::EndpointAddr> contact);
  void on_venue_message(const std::string& venue_id, const group::GroupMessage& m);
  void on_venue_view(const std::string& venue_id, const membership::View& v);
  void publish_meta(const std::string& venue_id);
  void merge_meta(Venue& mine, const Venue& theirs);

  void on_invite(const group::P2PMessage& m);
  void on_note(const group::P2PMessage& m, bool relay_copy);
  void on_note_ack(const group::P2PMessage& m);

  group::Node& node_;
  const identity::PolicyEngine& policy_;
  PresenceOptions opt_;
  EventSink events_;
  group::GroupSession* lobby_ = nullptr;
  Availability availability_ = Availability::available;
  Roster roster_;
  Stats stats_;
  std::optional<netsim::TimerId> beacon_timer_;

  std::map<std::string, Joined> joined_;
  std::map<std::string, VenueOffer> offers_;
  // Invitations still to be delivered: venue -> invitees.
  std::map<std::string, std::set<identity::Fingerprint>> pending_invites_;
  std::map<std::pair<std::string, identity::Fingerprint>, Outreach> invite_tx_;

  NoteStore store_;
  // note id -> peers that confirmed a relay copy
  std::map<std::string, std::set<identity::Fingerprint>> relay_acks_;
  std::map<std::pair<std::string, identity::Fingerprint>, Outreach> note_tx_;
};

}  // namespace collab::presence
