#include "collab/common/bytes.hpp"

#include <algorithm>

#include "collab/common/error.hpp"

namespace collab {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "INVALID_ARGUMENT";
    case Errc::invalid_policy: return "INVALID_POLICY";
    case Errc::duplicate_addr: return "DUPLICATE_ADDR";
    case Errc::oversize: return "OVERSIZE";
    case Errc::not_member: return "NOT_MEMBER";
    case Errc::not_in_view: return "NOT_IN_VIEW";
    case Errc::unreachable: return "UNREACHABLE";
    case Errc::decode: return "DECODE";
    case Errc::auth_fail: return "AUTH_FAIL";
    case Errc::stale_epoch: return "STALE_EPOCH";
    case Errc::replay: return "REPLAY";
    case Errc::counter_exhausted: return "COUNTER_EXHAUSTED";
    case Errc::bad_signature: return "BAD_SIGNATURE";
    case Errc::expired: return "EXPIRED";
    case Errc::pin_mismatch: return "PIN_MISMATCH";
    case Errc::untrusted: return "UNTRUSTED";
    case Errc::missing_partial: return "MISSING_PARTIAL";
    case Errc::denied: return "DENIED";
    case Errc::not_found: return "NOT_FOUND";
    case Errc::stale: return "STALE";
    case Errc::io: return "IO";
    case Errc::config: return "CONFIG";
    case Errc::precondition: return "PRECONDITION";
  }
  return "UNKNOWN";
}

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

[[noreturn]] void underflow() { throw Error(Errc::decode, "truncated input"); }

}  // namespace

std::string to_hex(ByteView data) {
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0xf]);
  }
  return out;
}

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Errc::decode, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::decode, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

template <std::size_t N>
std::array<std::uint8_t, N> array_from_hex(std::string_view hex) {
  auto raw = from_hex(hex);
  if (raw.size() != N) throw Error(Errc::decode, "hex value has wrong length");
  std::array<std::uint8_t, N> out{};
  std::copy(raw.begin(), raw.end(), out.begin());
  return out;
}

template std::array<std::uint8_t, 16> array_from_hex<16>(std::string_view);
template std::array<std::uint8_t, 32> array_from_hex<32>(std::string_view);
template std::array<std::uint8_t, 64> array_from_hex<64>(std::string_view);

void Writer::u16(std::uint16_t v) {
  buf_.push_back(static_cast<std::uint8_t>(v >> 8));
  buf_.push_back(static_cast<std::uint8_t>(v));
}

void Writer::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
}

void Writer::str8(std::string_view s) {
  if (s.size() > 0xff) throw Error(Errc::oversize, "string longer than 255 bytes");
  u8(static_cast<std::uint8_t>(s.size()));
  raw(as_bytes(s));
}

void Writer::blob16(ByteView data) {
  if (data.size() > 0xffff) throw Error(Errc::oversize, "blob longer than 65535 bytes");
  u16(static_cast<std::uint16_t>(data.size()));
  raw(data);
}

void Writer::blob32(ByteView data) {
  u32(static_cast<std::uint32_t>(data.size()));
  raw(data);
}

std::uint8_t Reader::u8() {
  if (remaining() < 1) underflow();
  return data_[pos_++];
}

std::uint16_t Reader::u16() {
  if (remaining() < 2) underflow();
  std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
  pos_ += 2;
  return v;
}

std::uint32_t Reader::u32() {
  if (remaining() < 4) underflow();
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  if (remaining() < 8) underflow();
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += 8;
  return v;
}

ByteView Reader::raw(std::size_t n) {
  if (remaining() < n) underflow();
  auto v = data_.subspan(pos_, n);
  pos_ += n;
  return v;
}

std::string Reader::str8() {
  auto n = u8();
  return to_string(raw(n));
}

Bytes Reader::blob16() {
  auto n = u16();
  auto v = raw(n);
  return Bytes(v.begin(), v.end());
}

Bytes Reader::blob32() {
  auto n = u32();
  auto v = raw(n);
  return Bytes(v.begin(), v.end());
}

void Reader::expect_done() const {
  if (!done()) throw Error(Errc::decode, "trailing bytes");
}

}  // namespace collab
