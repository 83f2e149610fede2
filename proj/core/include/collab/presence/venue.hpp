#pragma once

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "collab/presence/roster.hpp"

namespace collab::presence {

struct Venue {
  std::string id;  // hex of sha256(creator fp, name, created)
  std::string name;
  Visibility visibility = Visibility::private_;
  identity::Fingerprint creator{};
  std::int64_t created = 0;
  std::set<identity::Fingerprint> invited;

  std::string group() const { return "venue-" + id; }
  bool admits(const identity::Fingerprint& fp) const {
    return visibility == Visibility::public_ || fp == creator || invited.count(fp) != 0;
  }

  nlohmann::json to_json() const;
  static Venue from_json(const nlohmann::json& doc);  // throws decode; checks the id
};

std::string venue_id_of(const identity::Fingerprint& creator, std::string_view name, std::int64_t created);

struct ChatMessage {
  std::string venue_id;
  identity::Fingerprint author{};
  std::string body;
  std::uint64_t epoch = 0;
  std::uint64_t ts = 0;

  bool operator==(const ChatMessage&) const = default;
  nlohmann::json to_json() const;
};

constexpr std::size_t kMaxChatBody = 4096;

// Empty, oversize or non-UTF-8 bodies are INVALID_ARGUMENT.
void validate_body(std::string_view body);

}  // namespace collab::presence
