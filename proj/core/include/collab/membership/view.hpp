#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "collab/common/bytes.hpp"
#include "collab/identity/cert.hpp"
#include "collab/netsim/address.hpp"

namespace collab::membership {

using GroupId = std::string;
constexpr std::size_t kMaxGroupName = 128;

struct ProcessId {
  identity::Fingerprint fingerprint{};
  netsim::EndpointAddr addr;

  auto operator<=>(const ProcessId&) const = default;

  void encode(Writer& w) const;
  static ProcessId decode(Reader& r);
  // First 8 hex digits of the fingerprint plus the address.
  std::string short_name() const;
};

constexpr std::size_t kProcessIdWireSize = 32 + netsim::kEndpointAddrWireSize;

struct ViewId {
  std::uint64_t epoch = 0;
  ProcessId initiator;

  auto operator<=>(const ViewId&) const = default;

  void encode(Writer& w) const;
  static ViewId decode(Reader& r);
  std::string to_string() const;
};

struct View {
  GroupId group;
  ViewId id;
  std::vector<ProcessId> members;  // sorted, unique

  bool operator==(const View&) const = default;

  bool contains(const ProcessId& p) const;
  std::optional<std::size_t> index_of(const ProcessId& p) const;
  std::uint64_t epoch() const { return id.epoch; }

  // Throws Error(invalid_argument) when the invariants do not hold.
  void validate() const;

  void encode(Writer& w) const;
  static View decode(Reader& r);
};

void validate_group_name(const GroupId& group);

std::vector<ProcessId> sorted_unique(std::vector<ProcessId> members);

}  // namespace collab::membership

template <>
struct std::hash<collab::membership::ProcessId> {
  std::size_t operator()(const collab::membership::ProcessId& p) const noexcept {
    std::size_t h = std::hash<collab::netsim::EndpointAddr>{}(p.addr);
    for (int i = 0; i < 8; ++i) h = h * 257 + p.fingerprint[i];
    return h;
  }
};
