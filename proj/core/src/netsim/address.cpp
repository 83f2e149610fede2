#include "collab/netsim/address.hpp"

#include <charconv>

#include "collab/common/error.hpp"

namespace collab::netsim {

namespace {
constexpr std::array<std::uint8_t, 12> kV4Prefix = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff};
}

EndpointAddr EndpointAddr::sim(std::uint32_t node, std::uint16_t port) {
  EndpointAddr a;
  a.node_id[0] = 0x5e;  // distinguishes simulated hosts from mapped IPv4
  for (int i = 0; i < 4; ++i) a.node_id[12 + i] = static_cast<std::uint8_t>(node >> (24 - 8 * i));
  a.port = port;
  return a;
}

EndpointAddr EndpointAddr::ipv4(std::uint32_t host_order_addr, std::uint16_t port) {
  EndpointAddr a;
  std::copy(kV4Prefix.begin(), kV4Prefix.end(), a.node_id.begin());
  for (int i = 0; i < 4; ++i) a.node_id[12 + i] = static_cast<std::uint8_t>(host_order_addr >> (24 - 8 * i));
  a.port = port;
  return a;
}

bool EndpointAddr::is_ipv4_mapped() const { return std::equal(kV4Prefix.begin(), kV4Prefix.end(), node_id.begin()); }

std::uint32_t EndpointAddr::ipv4_host_order() const {
  std::uint32_t v = 0;
  for (int i = 12; i < 16; ++i) v = (v << 8) | node_id[i];
  return v;
}

std::string EndpointAddr::to_string() const {
  if (is_ipv4_mapped()) {
    auto v = ipv4_host_order();
    return std::to_string(v >> 24) + "." + std::to_string((v >> 16) & 0xff) + "." + std::to_string((v >> 8) & 0xff) +
           "." + std::to_string(v & 0xff) + ":" + std::to_string(port);
  }
  return to_hex(node_id) + ":" + std::to_string(port);
}

EndpointAddr EndpointAddr::parse(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw Error(Errc::invalid_argument, "address needs ':port'");
  auto host = text.substr(0, colon);
  auto port_text = text.substr(colon + 1);
  unsigned port = 0;
  auto [p, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || p != port_text.data() + port_text.size() || port > 0xffff) {
    throw Error(Errc::invalid_argument, "bad port in address '" + std::string(text) + "'");
  }
  if (host.size() == 32) {
    EndpointAddr a;
    a.node_id = array_from_hex<16>(host);
    a.port = static_cast<std::uint16_t>(port);
    return a;
  }
  if (host == "localhost") host = "127.0.0.1";
  std::uint32_t v = 0;
  int parts = 0;
  std::size_t pos = 0;
  while (parts < 4) {
    auto dot = host.find('.', pos);
    auto piece = host.substr(pos, dot == std::string_view::npos ? host.size() - pos : dot - pos);
    unsigned octet = 0;
    auto [q, ec2] = std::from_chars(piece.data(), piece.data() + piece.size(), octet);
    if (ec2 != std::errc() || q != piece.data() + piece.size() || octet > 255 || piece.empty()) {
      throw Error(Errc::invalid_argument, "bad host in address '" + std::string(text) + "'");
    }
    v = (v << 8) | octet;
    ++parts;
    if (dot == std::string_view::npos) break;
    pos = dot + 1;
  }
  if (parts != 4) throw Error(Errc::invalid_argument, "bad host in address '" + std::string(text) + "'");
  return ipv4(v, static_cast<std::uint16_t>(port));
}

void EndpointAddr::encode(Writer& w) const {
  w.raw(node_id);
  w.u16(port);
}

EndpointAddr EndpointAddr::decode(Reader& r) {
  EndpointAddr a;
  a.node_id = r.fixed<16>();
  a.port = r.u16();
  return a;
}

}  // namespace collab::netsim
