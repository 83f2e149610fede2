#pragma once

// Thin RAII wrappers over libsodium. Everything above this header speaks in
// fixed-size arrays and byte spans, never raw sodium calls.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "collab/common/bytes.hpp"

namespace collab::crypto {

constexpr std::size_t kDigestSize = 32;
constexpr std::size_t kPublicKeySize = 32;
constexpr std::size_t kSecretKeySize = 64;
constexpr std::size_t kSignatureSize = 64;
constexpr std::size_t kAeadKeySize = 32;
constexpr std::size_t kAeadNonceSize = 12;
constexpr std::size_t kAeadTagSize = 16;
constexpr std::size_t kBoxNonceSize = 24;
constexpr std::size_t kBoxOverhead = 16;

using Digest = std::array<std::uint8_t, kDigestSize>;
using PublicKey = std::array<std::uint8_t, kPublicKeySize>;
using Signature = std::array<std::uint8_t, kSignatureSize>;
using AeadKey = std::array<std::uint8_t, kAeadKeySize>;
using AeadNonce = std::array<std::uint8_t, kAeadNonceSize>;
using BoxNonce = std::array<std::uint8_t, kBoxNonceSize>;

// Idempotent; called by every entry point that touches libsodium.
void ensure_init();

void secure_zero(std::span<std::uint8_t> buf);

Digest sha256(ByteView data);

class Sha256 {
 public:
  Sha256();
  Sha256& update(ByteView data);
  Sha256& update(std::string_view s) { return update(as_bytes(s)); }
  Digest finish();

 private:
  alignas(64) std::array<std::uint8_t, 128> state_{};
};

Digest hmac_sha256(ByteView key, ByteView message);

// Ed25519 secret key; wiped on destruction.
class SecretKey {
 public:
  SecretKey() = default;
  explicit SecretKey(std::span<const std::uint8_t, kSecretKeySize> raw);
  SecretKey(const SecretKey&) = default;
  SecretKey& operator=(const SecretKey&) = default;
  ~SecretKey();

  const std::array<std::uint8_t, kSecretKeySize>& raw() const { return raw_; }

 private:
  std::array<std::uint8_t, kSecretKeySize> raw_{};
};

struct SigningKeyPair {
  PublicKey public_key{};
  SecretKey secret_key;
};

SigningKeyPair signing_keypair_from_seed(std::span<const std::uint8_t, 32> seed);
Signature sign(const SecretKey& key, ByteView message);
bool verify(const PublicKey& key, ByteView message, const Signature& sig);

// ChaCha20-Poly1305 (IETF). Output is ciphertext followed by the 16-byte tag.
Bytes aead_encrypt(const AeadKey& key, const AeadNonce& nonce, ByteView plaintext, ByteView aad);
std::optional<Bytes> aead_decrypt(const AeadKey& key, const AeadNonce& nonce, ByteView ciphertext_and_tag,
                                  ByteView aad);

// Authenticated public-key encryption between two Ed25519 identities (keys
// are converted to X25519 internally).
Bytes box_seal(const SecretKey& sender, const PublicKey& recipient, const BoxNonce& nonce, ByteView message);
std::optional<Bytes> box_open(const SecretKey& recipient, const PublicKey& sender, const BoxNonce& nonce,
                              ByteView boxed);

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  std::uint64_t next_u64();
  template <std::size_t N>
  std::array<std::uint8_t, N> array() {
    std::array<std::uint8_t, N> out{};
    fill(out);
    return out;
  }
};

class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

// Deterministic stream keyed by (seed, label): simulation runs draw key
// material from here so a seed fully determines a run.
class SeededRandom final : public RandomSource {
 public:
  SeededRandom(std::uint64_t seed, std::string_view label);
  void fill(std::span<std::uint8_t> out) override;

 private:
  Digest key_{};
};

}  // namespace collab::crypto
