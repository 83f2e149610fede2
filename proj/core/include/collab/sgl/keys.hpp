#pragma once

#include <cstdint>
#include <string>

#include "collab/common/bytes.hpp"
#include "collab/crypto/crypto.hpp"

namespace collab::sgl {

struct KeyMaterial {
  std::string group;
  std::uint64_t epoch = 0;
  crypto::AeadKey enc_key{};
  crypto::AeadKey mac_key{};

  KeyMaterial() = default;
  KeyMaterial(const KeyMaterial&) = default;
  KeyMaterial& operator=(const KeyMaterial&) = default;
  ~KeyMaterial() { wipe(); }

  void wipe() {
    crypto::secure_zero(enc_key);
    crypto::secure_zero(mac_key);
  }
  bool operator==(const KeyMaterial&) const = default;
};

// HKDF-SHA256 (RFC 5869) on top of HMAC-SHA256.
crypto::Digest hkdf_extract(ByteView salt, ByteView ikm);
Bytes hkdf_expand(const crypto::Digest& prk, ByteView info, std::size_t length);

// Expands the shared element into labelled keys bound to (group, epoch).
KeyMaterial derive_keys(ByteView shared, const std::string& group, std::uint64_t epoch);

}  // namespace collab::sgl
