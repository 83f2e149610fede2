#include "collab/fileshare/index.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace collab::fileshare {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) != 0 && c < 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> normalize_terms(std::string_view expr) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : expr) {
    if (std::isspace(static_cast<unsigned char>(ch)) != 0) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::set<std::string> ShareEntry::tokens() const {
  auto t = tokenize(name);
  std::set<std::string> out(t.begin(), t.end());
  for (const auto& tag : tags) {
    std::string low;
    for (char c : tag) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    out.insert(low);
  }
  return out;
}

bool entry_matches(const ShareEntry& e, const std::vector<std::string>& terms) {
  if (terms.empty()) return false;
  auto toks = e.tokens();
  return std::all_of(terms.begin(), terms.end(), [&](const std::string& term) {
    return std::any_of(toks.begin(), toks.end(), [&](const std::string& t) { return t.find(term) != std::string::npos; });
  });
}

Result<EntryId> hash_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error(Errc::io, "cannot read " + path.string());
  crypto::Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    auto n = in.gcount();
    if (n > 0) h.update(ByteView(reinterpret_cast<const std::uint8_t*>(buf.data()), static_cast<std::size_t>(n)));
  }
  if (in.bad()) return Error(Errc::io, "read error on " + path.string());
  return h.finish();
}

std::int64_t file_mtime(const fs::path& path) {
  std::error_code ec;
  auto t = fs::last_write_time(path, ec);
  if (ec) return -1;
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::file_clock::to_sys(t).time_since_epoch()).count();
}

json ShareEntry::to_json() const {
  return json{{"entry_id", to_hex(entry_id)}, {"path", path.string()}, {"name", name}, {"size", size},
              {"tags", tags},                {"added", added},       {"mtime", mtime}};
}

json ShareEntry::metadata() const {
  return json{{"entry_id", to_hex(entry_id)}, {"name", name}, {"size", size}, {"tags", tags}};
}

ShareEntry ShareEntry::from_json(const json& doc) {
  try {
    ShareEntry e;
    e.entry_id = array_from_hex<32>(doc.at("entry_id").get<std::string>());
    e.path = doc.value("path", "");
    e.name = doc.at("name").get<std::string>();
    e.size = doc.at("size").get<std::uint64_t>();
    e.tags = doc.value("tags", std::set<std::string>{});
    e.added = doc.value("added", std::int64_t{0});
    e.mtime = doc.value("mtime", std::int64_t{0});
    return e;
  } catch (const json::exception& ex) {
    throw Error(Errc::decode, std::string("malformed share entry: ") + ex.what());
  }
}

ShareIndex::ShareIndex(std::optional<fs::path> manifest) : manifest_(std::move(manifest)) {
  if (manifest_) load();
}

void ShareIndex::load() {
  std::ifstream in(*manifest_);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto e = ShareEntry::from_json(json::parse(line));
      entries_[e.entry_id] = std::move(e);
    } catch (const std::exception&) {
    }
  }
}

void ShareIndex::save() const {
  if (!manifest_) return;
  auto tmp = *manifest_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& [id, e] : entries_) out << e.to_json().dump() << '\n';
    if (!out) throw Error(Errc::io, "cannot write manifest " + tmp.string());
  }
  fs::rename(tmp, *manifest_);
}

Result<ShareEntry> ShareIndex::add_share(const fs::path& path, const std::set<std::string>& tags, std::int64_t now) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return Error(Errc::io, "not a readable file: " + path.string());
  auto mtime = file_mtime(path);
  auto id = hash_file(path);
  if (!id) return id.error();
  auto it = entries_.find(*id);
  if (it != entries_.end()) {
    it->second.tags.insert(tags.begin(), tags.end());
    save();
    return it->second;
  }
  ShareEntry e;
  e.entry_id = *id;
  e.path = fs::absolute(path);
  e.name = path.filename().string();
  e.size = fs::file_size(path, ec);
  e.tags = tags;
  e.added = now;
  e.mtime = mtime;
  entries_[e.entry_id] = e;
  save();
  return e;
}

bool ShareIndex::remove(const EntryId& id) {
  bool gone = entries_.erase(id) != 0;
  if (gone) save();
  return gone;
}

std::vector<ShareEntry> ShareIndex::match(const std::vector<std::string>& terms) const {
  std::vector<ShareEntry> out;
  for (const auto& [id, e] : entries_) {
    if (entry_matches(e, terms)) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const ShareEntry& a, const ShareEntry& b) {
    return std::tie(a.name, a.entry_id) < std::tie(b.name, b.entry_id);
  });
  return out;
}

const ShareEntry* ShareIndex::find(const EntryId& id) const {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

ShareEntry* ShareIndex::find_mutable(const EntryId& id) {
  auto it = entries_.find(id);
  return it == entries_.end() ? nullptr : &it->second;
}

std::vector<ShareEntry> ShareIndex::entries() const {
  std::vector<ShareEntry> out;
  for (const auto& [id, e] : entries_) out.push_back(e);
  return out;
}

}  // namespace collab::fileshare
