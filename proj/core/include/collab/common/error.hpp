#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace collab {

enum class Errc {
  invalid_argument,
  invalid_policy,
  duplicate_addr,
  oversize,
  not_member,
  not_in_view,
  unreachable,
  decode,
  auth_fail,
  stale_epoch,
  replay,
  counter_exhausted,
  bad_signature,
  expired,
  pin_mismatch,
  untrusted,
  missing_partial,
  denied,
  not_found,
  stale,
  io,
  config,
  precondition,
};

std::string_view errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Value-or-error for paths where failure is an expected outcome (frame
// verification, decryption, policy checks) rather than a bug.
template <typename T>
class Result {
 public:
  Result(T value) : data_(std::move(value)) {}  // NOLINT(google-explicit-constructor)
  Result(Error error) : data_(std::move(error)) {}  // NOLINT(google-explicit-constructor)

  bool ok() const noexcept { return data_.index() == 0; }
  explicit operator bool() const noexcept { return ok(); }

  T& value() & {
    if (!ok()) throw std::get<1>(data_);
    return std::get<0>(data_);
  }
  const T& value() const& {
    if (!ok()) throw std::get<1>(data_);
    return std::get<0>(data_);
  }
  T&& value() && {
    if (!ok()) throw std::get<1>(data_);
    return std::get<0>(std::move(data_));
  }
  const Error& error() const { return std::get<1>(data_); }
  Errc code() const { return std::get<1>(data_).code(); }

  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

 private:
  std::variant<T, Error> data_;
};

struct Unit {};

using Status = Result<Unit>;

inline Status ok_status() { return Unit{}; }

}  // namespace collab
