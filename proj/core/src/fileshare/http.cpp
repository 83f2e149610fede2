#include "collab/fileshare/http.hpp"

#include <charconv>
#include <map>

namespace collab::fileshare {

namespace {

std::string_view as_view(ByteView b) { return {reinterpret_cast<const char*>(b.data()), b.size()}; }

bool to_u64(std::string_view s, std::uint64_t& out) {
  auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty();
}

// Splits "line\r\nHeader: v\r\n...\r\n\r\n" into the first line and headers
// (lowercased names). Returns the body offset.
std::optional<std::size_t> split_head(std::string_view text, std::string& first,
                                      std::map<std::string, std::string>& headers) {
  auto end = text.find("\r\n\r\n");
  if (end == std::string_view::npos) return std::nullopt;
  auto head = text.substr(0, end);
  auto nl = head.find("\r\n");
  first = std::string(head.substr(0, nl));
  while (nl != std::string_view::npos) {
    auto start = nl + 2;
    nl = head.find("\r\n", start);
    auto line = head.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    auto colon = line.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    std::string name(line.substr(0, colon));
    for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    auto value = line.substr(colon + 1);
    while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    headers[name] = std::string(value);
  }
  return end + 4;
}

}  // namespace

Bytes ItemRequest::encode() const {
  auto text = "GET /item/" + to_hex(entry_id) + " HTTP/1.1\r\nRange: bytes=" + std::to_string(from) + "-" +
              std::to_string(to) + "\r\n\r\n";
  return Bytes(text.begin(), text.end());
}

std::optional<ItemRequest> ItemRequest::parse(ByteView raw) {
  std::string first;
  std::map<std::string, std::string> headers;
  auto body = split_head(as_view(raw), first, headers);
  if (!body || *body != raw.size()) return std::nullopt;
  constexpr std::string_view prefix = "GET /item/";
  constexpr std::string_view suffix = " HTTP/1.1";
  if (first.size() != prefix.size() + 64 + suffix.size() || !first.starts_with(prefix) || !first.ends_with(suffix)) {
    return std::nullopt;
  }
  ItemRequest r;
  try {
    r.entry_id = array_from_hex<32>(std::string_view(first).substr(prefix.size(), 64));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  auto range = headers.find("range");
  if (range == headers.end() || !range->second.starts_with("bytes=")) return std::nullopt;
  std::string_view range_text = std::string_view(range->second).substr(6);
  auto dash = range_text.find('-');
  if (dash == std::string_view::npos || !to_u64(range_text.substr(0, dash), r.from) || !to_u64(range_text.substr(dash + 1), r.to) ||
      r.to < r.from) {
    return std::nullopt;
  }
  return r;
}

Bytes ItemResponse::encode() const {
  std::string head;
  switch (status) {
    case 206: {
      head = "HTTP/1.1 206 Partial Content\r\n";
      if (body.empty()) {
        head += "Content-Range: bytes */" + std::to_string(size) + "\r\n";
      } else {
        head += "Content-Range: bytes " + std::to_string(from) + "-" + std::to_string(from + body.size() - 1) + "/" +
                std::to_string(size) + "\r\n";
      }
      if (eof) head += "X-EOF: 1\r\n";
      break;
    }
    case 403: head = "HTTP/1.1 403 Forbidden\r\n"; break;
    case 404: head = "HTTP/1.1 404 Not Found\r\n"; break;
    case 410: head = "HTTP/1.1 410 Gone\r\n"; break;
    default: head = "HTTP/1.1 400 Bad Request\r\n"; break;
  }
  head += "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n";
  Bytes out(head.begin(), head.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::optional<ItemResponse> ItemResponse::parse(ByteView raw) {
  std::string first;
  std::map<std::string, std::string> headers;
  auto body_at = split_head(as_view(raw), first, headers);
  if (!body_at || !first.starts_with("HTTP/1.1 ") || first.size() < 12) return std::nullopt;
  ItemResponse r;
  std::uint64_t status = 0;
  if (!to_u64(std::string_view(first).substr(9, 3), status)) return std::nullopt;
  r.status = static_cast<int>(status);
  std::uint64_t len = 0;
  auto cl = headers.find("content-length");
  if (cl == headers.end() || !to_u64(cl->second, len) || *body_at + len != raw.size()) return std::nullopt;
  r.body.assign(raw.begin() + static_cast<std::ptrdiff_t>(*body_at), raw.end());
  r.eof = headers.count("x-eof") != 0;
  if (r.status == 206) {
    auto cr = headers.find("content-range");
    if (cr == headers.end() || !cr->second.starts_with("bytes ")) return std::nullopt;
    std::string_view range_text = std::string_view(cr->second).substr(6);
    auto slash = range_text.find('/');
    if (slash == std::string_view::npos || !to_u64(range_text.substr(slash + 1), r.size)) return std::nullopt;
    auto range = range_text.substr(0, slash);
    if (range != "*") {
      auto dash = range.find('-');
      std::uint64_t to = 0;
      if (dash == std::string_view::npos || !to_u64(range.substr(0, dash), r.from) ||
          !to_u64(range.substr(dash + 1), to) || to + 1 - r.from != r.body.size()) {
        return std::nullopt;
      }
    } else if (!r.body.empty()) {
      return std::nullopt;
    }
  }
  return r;
}

}  // namespace collab::fileshare
