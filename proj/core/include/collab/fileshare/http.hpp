#pragma once

#include <optional>
#include <string>

#include "collab/common/bytes.hpp"
#include "collab/fileshare/index.hpp"

namespace collab::fileshare {

// GET /item/<64 hex> HTTP/1.1 with Range: bytes=<from>-<to> (inclusive).
struct ItemRequest {
  EntryId entry_id{};
  std::uint64_t from = 0;
  std::uint64_t to = 0;

  Bytes encode() const;
  static std::optional<ItemRequest> parse(ByteView text);
};

// 206 with Content-Range, or 403 / 404 / 410. A range starting at or past
// the end comes back as an empty 206 with X-EOF: 1.
struct ItemResponse {
  int status = 206;
  std::uint64_t from = 0;
  std::uint64_t size = 0;  // total file size
  bool eof = false;
  Bytes body;

  Bytes encode() const;
  static std::optional<ItemResponse> parse(ByteView message);
};

}  // namespace collab::fileshare
