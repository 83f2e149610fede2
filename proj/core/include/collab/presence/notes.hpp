#pragma once

#include <deque>
#include <filesystem>
#include <map>
#include <set>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "collab/identity/cert.hpp"

namespace collab::presence {

struct Note {
  std::string id;  // hex of sha256(author, recipient, created, body)
  identity::IdentityCert author;
  identity::Fingerprint recipient{};
  std::string body;
  std::int64_t created = 0;
  crypto::Signature signature{};  // author's, over the id

  static Note make(const identity::Identity& author, const identity::Fingerprint& recipient, std::string body,
                   std::int64_t created);
  // Recomputes the id and checks the author signature.
  bool valid() const;

  nlohmann::json to_json() const;
  static Note from_json(const nlohmann::json& doc);  // throws decode
};

std::string note_id_of(const identity::Fingerprint& author, const identity::Fingerprint& recipient,
                       std::int64_t created, std::string_view body);

// Notes this peer holds for delivery (own or relayed) and notes it received.
// Backed by an append-only JSON-lines file; every mutation is written and
// flushed before it is acknowledged to anyone.
class NoteStore {
 public:
  struct Held {
    Note note;
    bool relayed = false;  // held for someone else's note
    bool delivered = false;
  };

  explicit NoteStore(std::optional<std::filesystem::path> path = std::nullopt, std::size_t relay_cap = 1000);

  // False if already present. A full relay store evicts its oldest relayed
  // note, reported through `evicted`.
  bool hold(const Note& note, bool relayed, std::optional<std::string>* evicted = nullptr);
  void mark_delivered(const std::string& note_id);
  // False for a duplicate.
  bool receive(const Note& note);

  const std::map<std::string, Held>& held() const { return held_; }
  const std::vector<Note>& inbox() const { return inbox_; }
  bool in_inbox(const std::string& note_id) const { return inbox_ids_.count(note_id) != 0; }

 private:
  void append(const nlohmann::json& line);
  void replay();

  std::optional<std::filesystem::path> path_;
  std::size_t relay_cap_;
  std::map<std::string, Held> held_;
  std::deque<std::string> relay_order_;
  std::vector<Note> inbox_;
  std::set<std::string> inbox_ids_;
};

}  // namespace collab::presence
