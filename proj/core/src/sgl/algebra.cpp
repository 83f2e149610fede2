#include "collab/sgl/algebra.hpp"

#include <sodium.h>

#include "collab/common/error.hpp"

namespace collab::sgl {

ModPGroup::ModPGroup(std::uint64_t p, std::uint64_t g, std::uint64_t order) : p_(p), g_(g), order_(order) {
  if (p < 3 || p >= (1ULL << 63) || g < 2 || g >= p || order < 2 || order >= p) {
    throw Error(Errc::invalid_argument, "bad modular group parameters");
  }
  if (pow_mod(g, order, p) != 1) throw Error(Errc::invalid_argument, "generator order mismatch");
  width_ = 0;
  for (std::uint64_t v = p - 1; v != 0; v >>= 8) ++width_;
}

std::string ModPGroup::name() const {
  return "modp(p=" + std::to_string(p_) + ",g=" + std::to_string(g_) + ")";
}

std::uint64_t ModPGroup::pow_mod(std::uint64_t base, std::uint64_t e, std::uint64_t mod) {
  unsigned __int128 result = 1;
  unsigned __int128 b = base % mod;
  while (e != 0) {
    if (e & 1) result = result * b % mod;
    b = b * b % mod;
    e >>= 1;
  }
  return static_cast<std::uint64_t>(result);
}

Bytes ModPGroup::encode(std::uint64_t v) const {
  Bytes out(width_);
  for (std::size_t i = 0; i < width_; ++i) out[width_ - 1 - i] = static_cast<std::uint8_t>(v >> (8 * i));
  return out;
}

std::uint64_t ModPGroup::decode(ByteView element) const {
  if (!valid_element(element)) throw Error(Errc::decode, "invalid group element");
  std::uint64_t v = 0;
  for (auto b : element) v = (v << 8) | b;
  return v;
}

bool ModPGroup::valid_element(ByteView element) const {
  if (element.size() != width_) return false;
  std::uint64_t v = 0;
  for (auto b : element) v = (v << 8) | b;
  // Must lie in <g>: v^order == 1.
  return v >= 1 && v < p_ && pow_mod(v, order_, p_) == 1;
}

Scalar ModPGroup::scalar(std::uint64_t x) {
  Writer w;
  w.u64(x);
  return Scalar(w.take());
}

std::uint64_t ModPGroup::scalar_value(const Scalar& x) {
  Reader r(x.raw());
  auto v = r.u64();
  r.expect_done();
  return v;
}

Bytes ModPGroup::exp(ByteView element, const Scalar& x) const {
  return encode(pow_mod(decode(element), scalar_value(x), p_));
}

Scalar ModPGroup::random_scalar(crypto::RandomSource& rng) const {
  const std::uint64_t span = order_ - 1;
  const std::uint64_t bound = UINT64_MAX - UINT64_MAX % span;
  std::uint64_t draw;
  do {
    draw = rng.next_u64();
  } while (draw >= bound);
  return scalar(1 + draw % span);
}

Ristretto255Group::Ristretto255Group() { crypto::ensure_init(); }

Bytes Ristretto255Group::generator() const {
  std::array<std::uint8_t, crypto_core_ristretto255_SCALARBYTES> one{};
  one[0] = 1;
  Bytes out(crypto_core_ristretto255_BYTES);
  if (crypto_scalarmult_ristretto255_base(out.data(), one.data()) != 0) {
    throw Error(Errc::precondition, "ristretto255 base point unavailable");
  }
  return out;
}

bool Ristretto255Group::valid_element(ByteView element) const {
  return element.size() == crypto_core_ristretto255_BYTES &&
         crypto_core_ristretto255_is_valid_point(element.data()) == 1;
}

Bytes Ristretto255Group::exp(ByteView element, const Scalar& x) const {
  if (!valid_element(element)) throw Error(Errc::decode, "invalid ristretto255 element");
  if (x.raw().size() != crypto_core_ristretto255_SCALARBYTES) throw Error(Errc::decode, "bad scalar width");
  Bytes out(crypto_core_ristretto255_BYTES);
  if (crypto_scalarmult_ristretto255(out.data(), x.raw().data(), element.data()) != 0) {
    throw Error(Errc::decode, "ristretto255 exponentiation produced the identity");
  }
  return out;
}

Scalar Ristretto255Group::random_scalar(crypto::RandomSource& rng) const {
  Bytes wide(crypto_core_ristretto255_NONREDUCEDSCALARBYTES);
  Bytes s(crypto_core_ristretto255_SCALARBYTES);
  for (;;) {
    rng.fill(wide);
    crypto_core_ristretto255_scalar_reduce(s.data(), wide.data());
    if (!sodium_is_zero(s.data(), s.size())) break;
  }
  crypto::secure_zero(wide);
  return Scalar(std::move(s));
}

std::shared_ptr<const GroupAlgebra> toy_group() {
  static const auto g = std::make_shared<const ModPGroup>(23, 5, 22);
  return g;
}

std::shared_ptr<const GroupAlgebra> production_group() {
  static const auto g = std::make_shared<const Ristretto255Group>();
  return g;
}

std::shared_ptr<const GroupAlgebra> group_by_name(std::string_view name) {
  if (name == "toy") return toy_group();
  if (name == "ristretto255") return production_group();
  throw Error(Errc::config, "unknown group algebra '" + std::string(name) + "'");
}

}  // namespace collab::sgl
