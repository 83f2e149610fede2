#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "collab/crypto/crypto.hpp"

namespace collab::identity {

using Fingerprint = crypto::Digest;

// Lowercase hex, 64 characters.
std::string fingerprint_hex(const Fingerprint& fp);
Fingerprint fingerprint_from_hex(std::string_view hex);
Fingerprint fingerprint_of(const crypto::PublicKey& key);

// Self-contained certificate: self-signed, or signed by a registered root.
struct IdentityCert {
  std::string subject;
  crypto::PublicKey public_key{};
  std::int64_t issued = 0;
  std::int64_t expires = 0;
  std::string issuer;
  crypto::Signature signature{};

  Bytes tbs_bytes() const;
  Bytes canonical_bytes() const;
  static IdentityCert decode(ByteView canonical);

  Fingerprint fingerprint() const { return fingerprint_of(public_key); }
  bool self_signed() const { return issuer == subject; }
  bool signed_by(const crypto::PublicKey& key) const;

  nlohmann::json to_json() const;
  static IdentityCert from_json(const nlohmann::json& doc);

  bool operator==(const IdentityCert&) const = default;
};

struct Identity {
  IdentityCert cert;
  crypto::SecretKey secret;

  Fingerprint fingerprint() const { return cert.fingerprint(); }
  crypto::Signature sign(ByteView message) const { return crypto::sign(secret, message); }
};

constexpr std::int64_t kDefaultLifetimeMs = 10LL * 365 * 24 * 3600 * 1000;

// Fresh keypair and a self-signed certificate.
Identity new_identity(std::string subject, crypto::RandomSource& rng, std::int64_t now,
                      std::int64_t lifetime = kDefaultLifetimeMs);

// Fresh keypair whose certificate is signed by `issuer` (a registered root).
Identity new_identity_issued_by(const Identity& issuer, std::string subject, crypto::RandomSource& rng,
                                std::int64_t now, std::int64_t lifetime = kDefaultLifetimeMs);

// Identity file: {"cert": {...}, "secret_key": "<hex>"}.
void save_identity(const Identity& id, const std::filesystem::path& path);
Identity load_identity(const std::filesystem::path& path);

}  // namespace collab::identity
