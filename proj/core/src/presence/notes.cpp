#include "collab/presence/notes.hpp"

#include <fstream>

#include "collab/common/error.hpp"

namespace collab::presence {

using nlohmann::json;

std::string note_id_of(const identity::Fingerprint& author, const identity::Fingerprint& recipient,
                       std::int64_t created, std::string_view body) {
  Writer w;
  w.raw(as_bytes("collab-note-v1"));
  w.raw(author);
  w.raw(recipient);
  w.u64(static_cast<std::uint64_t>(created));
  w.blob32(as_bytes(body));
  return to_hex(crypto::sha256(w.bytes()));
}

Note Note::make(const identity::Identity& author, const identity::Fingerprint& recipient, std::string body,
                std::int64_t created) {
  Note n;
  n.author = author.cert;
  n.recipient = recipient;
  n.body = std::move(body);
  n.created = created;
  n.id = note_id_of(author.fingerprint(), recipient, created, n.body);
  n.signature = author.sign(as_bytes(n.id));
  return n;
}

bool Note::valid() const {
  return id == note_id_of(author.fingerprint(), recipient, created, body) &&
         crypto::verify(author.public_key, as_bytes(id), signature);
}

json Note::to_json() const {
  return json{{"note_id", id},
              {"author", author.to_json()},
              {"recipient", identity::fingerprint_hex(recipient)},
              {"body", body},
              {"created", created},
              {"signature", to_hex(signature)}};
}

Note Note::from_json(const json& doc) {
  try {
    Note n;
    n.id = doc.at("note_id").get<std::string>();
    n.author = identity::IdentityCert::from_json(doc.at("author"));
    n.recipient = identity::fingerprint_from_hex(doc.at("recipient").get<std::string>());
    n.body = doc.at("body").get<std::string>();
    n.created = doc.at("created").get<std::int64_t>();
    n.signature = array_from_hex<64>(doc.at("signature").get<std::string>());
    return n;
  } catch (const json::exception& e) {
    throw Error(Errc::decode, std::string("malformed note: ") + e.what());
  }
}

NoteStore::NoteStore(std::optional<std::filesystem::path> path, std::size_t relay_cap)
    : path_(std::move(path)), relay_cap_(relay_cap) {
  if (path_) replay();
}

void NoteStore::append(const json& line) {
  if (!path_) return;
  std::ofstream out(*path_, std::ios::app);
  out << line.dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::io, "cannot write note store " + path_->string());
}

void NoteStore::replay() {
  std::ifstream in(*path_);
  if (!in) return;  // first run
  std::string line;
  auto saved = std::move(path_);
  path_.reset();  // replay must not re-append
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      auto kind = j.at("kind").get<std::string>();
      if (kind == "held") {
        hold(Note::from_json(j.at("note")), j.value("relayed", false));
      } else if (kind == "inbox") {
        receive(Note::from_json(j.at("note")));
      } else if (kind == "delivered") {
        mark_delivered(j.at("note_id").get<std::string>());
      } else if (kind == "evicted") {
        auto id = j.at("note_id").get<std::string>();
        held_.erase(id);
        std::erase(relay_order_, id);
      }
    } catch (const std::exception&) {
      continue;  // a torn final line after a crash
    }
  }
  path_ = std::move(saved);
}

bool NoteStore::hold(const Note& note, bool relayed, std::optional<std::string>* evicted) {
  if (held_.count(note.id) != 0) return false;
  if (relayed && relay_order_.size() >= relay_cap_) {
    auto victim = relay_order_.front();
    relay_order_.pop_front();
    held_.erase(victim);
    append(json{{"kind", "evicted"}, {"note_id", victim}});
    if (evicted != nullptr) *evicted = victim;
  }
  append(json{{"kind", "held"}, {"relayed", relayed}, {"note", note.to_json()}});
  held_[note.id] = Held{note, relayed, false};
  if (relayed) relay_order_.push_back(note.id);
  return true;
}

void NoteStore::mark_delivered(const std::string& note_id) {
  auto it = held_.find(note_id);
  if (it == held_.end() || it->second.delivered) return;
  append(json{{"kind", "delivered"}, {"note_id", note_id}});
  it->second.delivered = true;
}

bool NoteStore::receive(const Note& note) {
  if (inbox_ids_.count(note.id) != 0) return false;
  append(json{{"kind", "inbox"}, {"note", note.to_json()}});
  inbox_ids_.insert(note.id);
  inbox_.push_back(note);
  return true;
}

}  // namespace collab::presence
