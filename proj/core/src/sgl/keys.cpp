#include "collab/sgl/keys.hpp"

namespace collab::sgl {

crypto::Digest hkdf_extract(ByteView salt, ByteView ikm) { return crypto::hmac_sha256(salt, ikm); }

Bytes hkdf_expand(const crypto::Digest& prk, ByteView info, std::size_t length) {
  Bytes out;
  crypto::Digest t{};
  std::size_t t_len = 0;
  for (std::uint8_t i = 1; out.size() < length; ++i) {
    Bytes block(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(t_len));
    block.insert(block.end(), info.begin(), info.end());
    block.push_back(i);
    t = crypto::hmac_sha256(prk, block);
    t_len = t.size();
    out.insert(out.end(), t.begin(), t.end());
  }
  out.resize(length);
  return out;
}

namespace {

crypto::AeadKey expand_label(const crypto::Digest& prk, std::string_view label, const std::string& group,
                             std::uint64_t epoch) {
  Writer w;
  w.str8(label);
  w.blob16(as_bytes(group));
  w.u64(epoch);
  auto okm = hkdf_expand(prk, w.take(), 32);
  crypto::AeadKey key{};
  std::copy(okm.begin(), okm.end(), key.begin());
  crypto::secure_zero(okm);
  return key;
}

}  // namespace

KeyMaterial derive_keys(ByteView shared, const std::string& group, std::uint64_t epoch) {
  auto prk = hkdf_extract(as_bytes("collab-sgl-v1"), shared);
  KeyMaterial km;
  km.group = group;
  km.epoch = epoch;
  km.enc_key = expand_label(prk, "sgl-enc", group, epoch);
  km.mac_key = expand_label(prk, "sgl-mac", group, epoch);
  crypto::secure_zero(prk);
  return km;
}

}  // namespace collab::sgl
