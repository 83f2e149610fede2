#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "collab/identity/cert.hpp"
#include "collab/membership/view.hpp"
#include "collab/ordcast/delivery.hpp"
#include "collab/ordcast/flush.hpp"
#include "collab/sgl/channel.hpp"

namespace collab::group {

using membership::GroupId;
using membership::ProcessId;
using membership::View;
using membership::ViewId;

enum class FrameType : std::uint8_t {
  data = 1,
  nack = 2,
  heartbeat = 3,
  join_req = 4,
  view_propose = 5,
  view_ack = 6,
  flush_cut = 7,
  flush_vec = 8,
  view_install = 9,
  leave = 10,
  probe = 11,
  p2p = 12,
};

std::string_view frame_type_name(FrameType t);

constexpr std::uint8_t kFlagControl = 0x40;
constexpr std::uint8_t kFlagSealed = 0x80;

// Signed frames: "IGC1" type body signature(64) with the signature covering
// everything before it. Every group frame body starts with the group name.
struct Envelope {
  FrameType type{};
  GroupId group;  // empty for p2p
  ByteView signed_part;
  crypto::Signature signature{};
  ByteView body;  // after the group name, before the signature
};

// Throws Error(decode).
Envelope parse_envelope(ByteView frame);
bool has_magic(ByteView frame);

Bytes finish_signed(Writer& w, const identity::Identity& id);
Writer start_frame(FrameType type, const GroupId& group);

struct DataHeader {
  GroupId group;
  ViewId view;
  ProcessId sender;
  std::uint64_t seq = 0;
  std::uint64_t ts = 0;
  ordcast::Mode mode = ordcast::Mode::fifo;
  bool control = false;
  bool sealed = false;
  std::uint16_t frag_index = 0;
  std::uint16_t frag_count = 1;

  Bytes encode() const;
};

struct DataFrame {
  DataHeader header;
  ByteView header_bytes;  // associated data for sealed frames
  std::optional<sgl::SealedMessage> sealed;
  Bytes payload;  // unsealed control payload
  ByteView signed_part;
  crypto::Signature signature{};

  static DataFrame decode(ByteView frame);
};

Bytes encode_sealed_data(const DataHeader& h, sgl::Sealer& sealer, ByteView fragment);
Bytes encode_signed_data(const DataHeader& h, ByteView payload, const identity::Identity& id);

struct Heartbeat {
  GroupId group;
  ViewId view;
  ProcessId sender;
  std::uint64_t ts = 0;
  std::uint64_t max_seq = 0;
  std::vector<std::uint64_t> delivered;

  Bytes encode(const identity::Identity& id) const;
  static Heartbeat decode(const Envelope& env);
};

struct Nack {
  GroupId group;
  ViewId view;
  ProcessId requester;
  ProcessId target;
  std::vector<ordcast::SeqRange> ranges;

  Bytes encode(const identity::Identity& id) const;
  static Nack decode(const Envelope& env);
};

struct JoinReq {
  GroupId group;
  ProcessId joiner;
  std::uint64_t max_epoch = 0;
  identity::IdentityCert cert;

  Bytes encode(const identity::Identity& id) const;
  static JoinReq decode(const Envelope& env);
};

struct Propose {
  View view;
  ProcessId proposer;
  identity::IdentityCert cert;

  Bytes encode(const identity::Identity& id) const;
  static Propose decode(const Envelope& env);
};

struct Ack {
  GroupId group;
  ViewId proposal;
  ProcessId acker;
  bool accept = true;
  std::uint64_t max_epoch = 0;
  std::optional<View> old_view;
  std::vector<std::uint64_t> contiguous;
  identity::IdentityCert cert;

  Bytes encode(const identity::Identity& id) const;
  static Ack decode(const Envelope& env);
};

struct FlushCut {
  GroupId group;
  ViewId proposal;
  ProcessId coordinator;
  std::vector<ordcast::OldViewCut> cuts;

  Bytes encode(const identity::Identity& id) const;
  static FlushCut decode(const Envelope& env);
};

// Sent once the member has delivered its old view's cut.
struct FlushVec {
  GroupId group;
  ViewId proposal;
  ProcessId reporter;
  std::vector<std::uint64_t> delivered;

  Bytes encode(const identity::Identity& id) const;
  static FlushVec decode(const Envelope& env);
};

struct Install {
  View view;
  ProcessId coordinator;
  std::vector<identity::IdentityCert> certs;

  Bytes encode(const identity::Identity& id) const;
  static Install decode(const Envelope& env);
};

struct Leave {
  GroupId group;
  ViewId view;
  ProcessId leaver;
  identity::IdentityCert cert;

  Bytes encode(const identity::Identity& id) const;
  static Leave decode(const Envelope& env);
};

struct Probe {
  View view;
  ProcessId sender;
  identity::IdentityCert cert;

  Bytes encode(const identity::Identity& id) const;
  static Probe decode(const Envelope& env);
};

// Point-to-point frame boxed to one recipient identity. Not an Envelope:
// crypto_box already authenticates the sender.
struct P2PFrame {
  identity::IdentityCert sender;
  identity::Fingerprint recipient{};
  crypto::BoxNonce nonce{};
  Bytes boxed;

  Bytes encode() const;
  static P2PFrame decode(ByteView frame);
};

// Superior proposal: higher epoch, or equal epoch and lower initiator.
bool superior(const ViewId& a, const ViewId& b);

}  // namespace collab::group
