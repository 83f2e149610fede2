#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>

#include "collab/common/bytes.hpp"

namespace collab::netsim {

// Simulated (or wall-clock mapped) milliseconds.
using SimTime = std::int64_t;

constexpr std::size_t kMaxDatagram = 8 * 1024;

struct EndpointAddr {
  std::array<std::uint8_t, 16> node_id{};
  std::uint16_t port = 0;

  auto operator<=>(const EndpointAddr&) const = default;

  // Node ids for simulated hosts: the 32-bit index in the last four bytes.
  static EndpointAddr sim(std::uint32_t node, std::uint16_t port = 1);
  // IPv4 a.b.c.d mapped into ::ffff:a.b.c.d.
  static EndpointAddr ipv4(std::uint32_t host_order_addr, std::uint16_t port);

  // "<32 hex>:<port>"; parse() also accepts "a.b.c.d:port".
  std::string to_string() const;
  static EndpointAddr parse(std::string_view text);

  bool is_ipv4_mapped() const;
  std::uint32_t ipv4_host_order() const;

  void encode(Writer& w) const;
  static EndpointAddr decode(Reader& r);
};

constexpr std::size_t kEndpointAddrWireSize = 18;

struct Datagram {
  EndpointAddr src;
  EndpointAddr dst;
  Bytes payload;
  SimTime send_time = 0;
};

}  // namespace collab::netsim

template <>
struct std::hash<collab::netsim::EndpointAddr> {
  std::size_t operator()(const collab::netsim::EndpointAddr& a) const noexcept {
    std::size_t h = a.port;
    for (auto b : a.node_id) h = h * 131 + b;
    return h;
  }
};
