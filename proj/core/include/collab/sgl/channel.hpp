#pragma once

#include <bitset>
#include <cstdint>
#include <map>
#include <memory>

#include "collab/common/error.hpp"
#include "collab/sgl/keys.hpp"

namespace collab::sgl {

struct SealedMessage {
  std::uint64_t epoch = 0;
  crypto::AeadNonce nonce{};  // sender index (4) || counter (8)
  Bytes ciphertext;
  std::array<std::uint8_t, crypto::kAeadTagSize> tag{};

  std::uint32_t sender_index() const;
  std::uint64_t counter() const;

  Bytes encode() const;
  static SealedMessage decode(ByteView wire);
  // Partial decode; leaves the reader after the tag.
  static SealedMessage read(Reader& r);
  void write(Writer& w) const;
};

crypto::AeadNonce make_nonce(std::uint32_t sender_index, std::uint64_t counter);

class Sealer {
 public:
  Sealer(std::shared_ptr<const KeyMaterial> keys, std::uint32_t sender_index,
         std::uint64_t counter_limit = UINT64_MAX);

  // COUNTER_EXHAUSTED once the limit is reached; the caller must rekey.
  Result<SealedMessage> seal(ByteView plaintext, ByteView aad);

  std::uint64_t epoch() const { return keys_->epoch; }
  std::uint64_t next_counter() const { return counter_; }
  bool exhausted() const { return counter_ >= limit_; }

 private:
  std::shared_ptr<const KeyMaterial> keys_;
  std::uint32_t sender_;
  std::uint64_t counter_ = 0;
  std::uint64_t limit_;
};

// Sliding acceptance bitmap over counters from one sender.
class ReplayWindow {
 public:
  static constexpr std::size_t kSize = 1024;

  bool acceptable(std::uint64_t counter) const;
  void mark(std::uint64_t counter);

 private:
  bool any_ = false;
  std::uint64_t top_ = 0;
  std::bitset<kSize> seen_;  // bit i <=> counter top_ - i
};

class Opener {
 public:
  explicit Opener(std::shared_ptr<const KeyMaterial> keys);

  // STALE_EPOCH, REPLAY or AUTH_FAIL; the nonce is only recorded once the
  // tag verifies.
  Result<Bytes> open(const SealedMessage& sealed, ByteView aad);

  std::uint64_t epoch() const { return keys_->epoch; }
  std::uint64_t auth_failures() const { return auth_failures_; }
  std::uint64_t replays() const { return replays_; }

 private:
  std::shared_ptr<const KeyMaterial> keys_;
  std::map<std::uint32_t, ReplayWindow> windows_;
  std::uint64_t auth_failures_ = 0;
  std::uint64_t replays_ = 0;
};

}  // namespace collab::sgl
