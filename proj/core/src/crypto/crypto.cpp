#include "collab/crypto/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "collab/common/error.hpp"

namespace collab::crypto {

static_assert(sizeof(crypto_hash_sha256_state) <= 128);

void ensure_init() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

void secure_zero(std::span<std::uint8_t> buf) { sodium_memzero(buf.data(), buf.size()); }

Digest sha256(ByteView data) {
  ensure_init();
  Digest out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Sha256::Sha256() {
  ensure_init();
  crypto_hash_sha256_init(reinterpret_cast<crypto_hash_sha256_state*>(state_.data()));
}

Sha256& Sha256::update(ByteView data) {
  crypto_hash_sha256_update(reinterpret_cast<crypto_hash_sha256_state*>(state_.data()), data.data(),
                            data.size());
  return *this;
}

Digest Sha256::finish() {
  Digest out{};
  crypto_hash_sha256_final(reinterpret_cast<crypto_hash_sha256_state*>(state_.data()), out.data());
  return out;
}

Digest hmac_sha256(ByteView key, ByteView message) {
  ensure_init();
  crypto_auth_hmacsha256_state st;
  crypto_auth_hmacsha256_init(&st, key.data(), key.size());
  crypto_auth_hmacsha256_update(&st, message.data(), message.size());
  Digest out{};
  crypto_auth_hmacsha256_final(&st, out.data());
  sodium_memzero(&st, sizeof st);
  return out;
}

SecretKey::SecretKey(std::span<const std::uint8_t, kSecretKeySize> raw) {
  std::memcpy(raw_.data(), raw.data(), raw_.size());
}

SecretKey::~SecretKey() { sodium_memzero(raw_.data(), raw_.size()); }

SigningKeyPair signing_keypair_from_seed(std::span<const std::uint8_t, 32> seed) {
  ensure_init();
  SigningKeyPair kp;
  std::array<std::uint8_t, kSecretKeySize> sk{};
  crypto_sign_seed_keypair(kp.public_key.data(), sk.data(), seed.data());
  kp.secret_key = SecretKey(sk);
  sodium_memzero(sk.data(), sk.size());
  return kp;
}

Signature sign(const SecretKey& key, ByteView message) {
  ensure_init();
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), key.raw().data());
  return sig;
}

bool verify(const PublicKey& key, ByteView message, const Signature& sig) {
  ensure_init();
  return crypto_sign_verify_detached(sig.data(), message.data(), message.size(), key.data()) == 0;
}

Bytes aead_encrypt(const AeadKey& key, const AeadNonce& nonce, ByteView plaintext, ByteView aad) {
  ensure_init();
  Bytes out(plaintext.size() + kAeadTagSize);
  unsigned long long out_len = 0;
  crypto_aead_chacha20poly1305_ietf_encrypt(out.data(), &out_len, plaintext.data(), plaintext.size(),
                                            aad.data(), aad.size(), nullptr, nonce.data(), key.data());
  out.resize(out_len);
  return out;
}

std::optional<Bytes> aead_decrypt(const AeadKey& key, const AeadNonce& nonce, ByteView ciphertext_and_tag,
                                  ByteView aad) {
  ensure_init();
  if (ciphertext_and_tag.size() < kAeadTagSize) return std::nullopt;
  Bytes out(ciphertext_and_tag.size() - kAeadTagSize);
  unsigned long long out_len = 0;
  if (crypto_aead_chacha20poly1305_ietf_decrypt(out.data(), &out_len, nullptr, ciphertext_and_tag.data(),
                                                ciphertext_and_tag.size(), aad.data(), aad.size(),
                                                nonce.data(), key.data()) != 0) {
    return std::nullopt;
  }
  out.resize(out_len);
  return out;
}

namespace {

struct CurveKeys {
  std::array<std::uint8_t, crypto_box_SECRETKEYBYTES> secret{};
  std::array<std::uint8_t, crypto_box_PUBLICKEYBYTES> peer{};
  bool ok = false;
  ~CurveKeys() { sodium_memzero(secret.data(), secret.size()); }
};

CurveKeys convert(const SecretKey& own, const PublicKey& peer) {
  CurveKeys keys;
  keys.ok = crypto_sign_ed25519_sk_to_curve25519(keys.secret.data(), own.raw().data()) == 0 &&
            crypto_sign_ed25519_pk_to_curve25519(keys.peer.data(), peer.data()) == 0;
  return keys;
}

}  // namespace

Bytes box_seal(const SecretKey& sender, const PublicKey& recipient, const BoxNonce& nonce, ByteView message) {
  ensure_init();
  auto keys = convert(sender, recipient);
  if (!keys.ok) throw Error(Errc::invalid_argument, "recipient key is not a valid Ed25519 point");
  Bytes out(message.size() + crypto_box_MACBYTES);
  if (crypto_box_easy(out.data(), message.data(), message.size(), nonce.data(), keys.peer.data(),
                      keys.secret.data()) != 0) {
    throw Error(Errc::invalid_argument, "box encryption failed");
  }
  return out;
}

std::optional<Bytes> box_open(const SecretKey& recipient, const PublicKey& sender, const BoxNonce& nonce,
                              ByteView boxed) {
  ensure_init();
  if (boxed.size() < crypto_box_MACBYTES) return std::nullopt;
  auto keys = convert(recipient, sender);
  if (!keys.ok) return std::nullopt;
  Bytes out(boxed.size() - crypto_box_MACBYTES);
  if (crypto_box_open_easy(out.data(), boxed.data(), boxed.size(), nonce.data(), keys.peer.data(),
                           keys.secret.data()) != 0) {
    return std::nullopt;
  }
  return out;
}

std::uint64_t RandomSource::next_u64() {
  std::array<std::uint8_t, 8> b{};
  fill(b);
  std::uint64_t v = 0;
  for (auto x : b) v = (v << 8) | x;
  return v;
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
  ensure_init();
  randombytes_buf(out.data(), out.size());
}

SeededRandom::SeededRandom(std::uint64_t seed, std::string_view label) {
  Sha256 h;
  h.update("collab-seeded-random");
  h.update(label);
  Writer w;
  w.u64(seed);
  h.update(w.bytes());
  key_ = h.finish();
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
  static_assert(randombytes_SEEDBYTES == kDigestSize);
  randombytes_buf_deterministic(out.data(), out.size(), key_.data());
  key_ = sha256(key_);
}

}  // namespace collab::crypto
