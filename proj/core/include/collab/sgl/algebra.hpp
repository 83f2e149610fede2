#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "collab/common/bytes.hpp"
#include "collab/crypto/crypto.hpp"

namespace collab::sgl {

// Secret exponent, canonical encoding of the active algebra; wiped on destruction.
class Scalar {
 public:
  Scalar() = default;
  explicit Scalar(Bytes raw) : raw_(std::move(raw)) {}
  Scalar(const Scalar&) = default;
  Scalar(Scalar&&) noexcept = default;
  Scalar& operator=(const Scalar&) = default;
  Scalar& operator=(Scalar&&) noexcept = default;
  ~Scalar() { crypto::secure_zero(raw_); }

  const Bytes& raw() const { return raw_; }
  bool empty() const { return raw_.empty(); }

 private:
  Bytes raw_;
};

// Cyclic group with a fixed generator. Elements travel as fixed-width
// canonical encodings.
class GroupAlgebra {
 public:
  virtual ~GroupAlgebra() = default;

  virtual std::string name() const = 0;
  virtual std::size_t element_size() const = 0;
  virtual Bytes generator() const = 0;
  virtual bool valid_element(ByteView element) const = 0;
  // Throws Error(decode) on a non-canonical element.
  virtual Bytes exp(ByteView element, const Scalar& x) const = 0;
  virtual Scalar random_scalar(crypto::RandomSource& rng) const = 0;
};

// Multiplicative subgroup of Z_p^* generated by g, of the given order. Only
// sized for oracle-checkable test profiles (p < 2^63).
class ModPGroup final : public GroupAlgebra {
 public:
  ModPGroup(std::uint64_t p, std::uint64_t g, std::uint64_t order);

  std::string name() const override;
  std::size_t element_size() const override { return width_; }
  Bytes generator() const override { return encode(g_); }
  bool valid_element(ByteView element) const override;
  Bytes exp(ByteView element, const Scalar& x) const override;
  Scalar random_scalar(crypto::RandomSource& rng) const override;

  Bytes encode(std::uint64_t v) const;
  std::uint64_t decode(ByteView element) const;
  static Scalar scalar(std::uint64_t x);
  static std::uint64_t scalar_value(const Scalar& x);
  static std::uint64_t pow_mod(std::uint64_t base, std::uint64_t e, std::uint64_t mod);

  std::uint64_t p() const { return p_; }
  std::uint64_t order() const { return order_; }

 private:
  std::uint64_t p_;
  std::uint64_t g_;
  std::uint64_t order_;
  std::size_t width_;
};

// Prime-order group over Curve25519 (ristretto255); the production profile.
class Ristretto255Group final : public GroupAlgebra {
 public:
  Ristretto255Group();

  std::string name() const override { return "ristretto255"; }
  std::size_t element_size() const override { return 32; }
  Bytes generator() const override;
  bool valid_element(ByteView element) const override;
  Bytes exp(ByteView element, const Scalar& x) const override;
  Scalar random_scalar(crypto::RandomSource& rng) const override;
};

// p=23, g=5 (order 22): small enough that every result is hand-checkable.
std::shared_ptr<const GroupAlgebra> toy_group();
std::shared_ptr<const GroupAlgebra> production_group();
// "toy" | "ristretto255"
std::shared_ptr<const GroupAlgebra> group_by_name(std::string_view name);

}  // namespace collab::sgl
