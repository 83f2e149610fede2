#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "collab/common/error.hpp"
#include "collab/crypto/crypto.hpp"

namespace collab::fileshare {

using EntryId = crypto::Digest;

struct ShareEntry {
  EntryId entry_id{};
  std::filesystem::path path;
  std::string name;
  std::uint64_t size = 0;
  std::set<std::string> tags;
  std::int64_t added = 0;
  std::int64_t mtime = 0;  // file mtime when last hashed

  std::set<std::string> tokens() const;
  nlohmann::json to_json() const;  // manifest line
  nlohmann::json metadata() const;  // what goes into hits: {entry_id, name, size, tags}
  static ShareEntry from_json(const nlohmann::json& doc);
};

// Lowercase runs of ASCII alphanumerics (other bytes split tokens).
std::vector<std::string> tokenize(std::string_view text);
// Query expression -> lowercase terms; whitespace separated, implicit AND.
std::vector<std::string> normalize_terms(std::string_view expr);
bool entry_matches(const ShareEntry& e, const std::vector<std::string>& terms);

Result<EntryId> hash_file(const std::filesystem::path& path);
std::int64_t file_mtime(const std::filesystem::path& path);

class ShareIndex {
 public:
  explicit ShareIndex(std::optional<std::filesystem::path> manifest = std::nullopt);

  // IO on unreadable files. Same content twice merges tags.
  Result<ShareEntry> add_share(const std::filesystem::path& path, const std::set<std::string>& tags,
                               std::int64_t now);
  bool remove(const EntryId& id);

  // Entries whose tokens contain every term as a substring; sorted by name.
  std::vector<ShareEntry> match(const std::vector<std::string>& terms) const;
  const ShareEntry* find(const EntryId& id) const;
  ShareEntry* find_mutable(const EntryId& id);
  std::vector<ShareEntry> entries() const;
  std::size_t size() const { return entries_.size(); }
  void save() const;

 private:
  void load();

  std::optional<std::filesystem::path> manifest_;
  std::map<EntryId, ShareEntry> entries_;
};

}  // namespace collab::fileshare
