#include "collab/sgl/channel.hpp"

namespace collab::sgl {

crypto::AeadNonce make_nonce(std::uint32_t sender_index, std::uint64_t counter) {
  crypto::AeadNonce n{};
  for (int i = 0; i < 4; ++i) n[i] = static_cast<std::uint8_t>(sender_index >> (24 - 8 * i));
  for (int i = 0; i < 8; ++i) n[4 + i] = static_cast<std::uint8_t>(counter >> (56 - 8 * i));
  return n;
}

std::uint32_t SealedMessage::sender_index() const {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | nonce[i];
  return v;
}

std::uint64_t SealedMessage::counter() const {
  std::uint64_t v = 0;
  for (int i = 4; i < 12; ++i) v = (v << 8) | nonce[i];
  return v;
}

void SealedMessage::write(Writer& w) const {
  w.u64(epoch);
  w.raw(nonce);
  w.blob32(ciphertext);
  w.raw(tag);
}

SealedMessage SealedMessage::read(Reader& r) {
  SealedMessage m;
  m.epoch = r.u64();
  m.nonce = r.fixed<crypto::kAeadNonceSize>();
  m.ciphertext = r.blob32();
  m.tag = r.fixed<crypto::kAeadTagSize>();
  return m;
}

Bytes SealedMessage::encode() const {
  Writer w;
  write(w);
  return w.take();
}

SealedMessage SealedMessage::decode(ByteView wire) {
  Reader r(wire);
  auto m = read(r);
  r.expect_done();
  return m;
}

namespace {

Bytes full_aad(const KeyMaterial& keys, ByteView aad) {
  Writer w;
  w.raw(as_bytes("sgl1"));
  w.blob16(as_bytes(keys.group));
  w.u64(keys.epoch);
  w.raw(aad);
  return w.take();
}

}  // namespace

Sealer::Sealer(std::shared_ptr<const KeyMaterial> keys, std::uint32_t sender_index, std::uint64_t counter_limit)
    : keys_(std::move(keys)), sender_(sender_index), limit_(counter_limit) {
  if (!keys_) throw Error(Errc::invalid_argument, "sealer needs key material");
}

Result<SealedMessage> Sealer::seal(ByteView plaintext, ByteView aad) {
  if (exhausted()) return Error(Errc::counter_exhausted, "nonce counter exhausted; rekey required");
  SealedMessage m;
  m.epoch = keys_->epoch;
  m.nonce = make_nonce(sender_, counter_++);
  auto out = crypto::aead_encrypt(keys_->enc_key, m.nonce, plaintext, full_aad(*keys_, aad));
  auto split = out.end() - crypto::kAeadTagSize;
  std::copy(split, out.end(), m.tag.begin());
  m.ciphertext.assign(out.begin(), split);
  return m;
}

bool ReplayWindow::acceptable(std::uint64_t counter) const {
  if (!any_ || counter > top_) return true;
  std::uint64_t age = top_ - counter;
  if (age >= kSize) return false;
  return !seen_[age];
}

void ReplayWindow::mark(std::uint64_t counter) {
  if (!any_) {
    any_ = true;
    top_ = counter;
    seen_.reset();
    seen_[0] = true;
    return;
  }
  if (counter > top_) {
    std::uint64_t shift = counter - top_;
    if (shift >= kSize) {
      seen_.reset();
    } else {
      seen_ <<= shift;
    }
    top_ = counter;
    seen_[0] = true;
    return;
  }
  std::uint64_t age = top_ - counter;
  if (age < kSize) seen_[age] = true;
}

Opener::Opener(std::shared_ptr<const KeyMaterial> keys) : keys_(std::move(keys)) {
  if (!keys_) throw Error(Errc::invalid_argument, "opener needs key material");
}

Result<Bytes> Opener::open(const SealedMessage& sealed, ByteView aad) {
  if (sealed.epoch != keys_->epoch) {
    return Error(Errc::stale_epoch, "sealed in epoch " + std::to_string(sealed.epoch) + ", keys are for epoch " +
                                        std::to_string(keys_->epoch));
  }
  auto& window = windows_[sealed.sender_index()];
  if (!window.acceptable(sealed.counter())) {
    ++replays_;
    return Error(Errc::replay, "nonce already used or outside the replay window");
  }
  Bytes ct = sealed.ciphertext;
  ct.insert(ct.end(), sealed.tag.begin(), sealed.tag.end());
  auto pt = crypto::aead_decrypt(keys_->enc_key, sealed.nonce, ct, full_aad(*keys_, aad));
  if (!pt) {
    ++auth_failures_;
    return Error(Errc::auth_fail, "authentication tag mismatch");
  }
  window.mark(sealed.counter());
  return std::move(*pt);
}

}  // namespace collab::sgl
