#include "collab/group/wire.hpp"

#include "collab/common/error.hpp"

namespace collab::group {

namespace {

constexpr std::string_view kMagic = "IGC1";

void put_cert(Writer& w, const identity::IdentityCert& c) { w.blob16(c.canonical_bytes()); }
identity::IdentityCert get_cert(Reader& r) { return identity::IdentityCert::decode(r.blob16()); }

void put_vec(Writer& w, const std::vector<std::uint64_t>& v) {
  w.u16(static_cast<std::uint16_t>(v.size()));
  for (auto x : v) w.u64(x);
}

std::vector<std::uint64_t> get_vec(Reader& r) {
  std::vector<std::uint64_t> v(r.u16());
  for (auto& x : v) x = r.u64();
  return v;
}

void put_view_body(Writer& w, const View& v) {
  // group already written by start_frame
  v.id.encode(w);
  w.u16(static_cast<std::uint16_t>(v.members.size()));
  for (const auto& m : v.members) m.encode(w);
}

View get_view_body(Reader& r, const GroupId& group) {
  View v;
  v.group = group;
  v.id = ViewId::decode(r);
  auto n = r.u16();
  for (std::uint16_t i = 0; i < n; ++i) v.members.push_back(ProcessId::decode(r));
  try {
    v.validate();
  } catch (const Error& e) {
    throw Error(Errc::decode, e.what());
  }
  return v;
}

}  // namespace

std::string_view frame_type_name(FrameType t) {
  switch (t) {
    case FrameType::data: return "DATA";
    case FrameType::nack: return "NACK";
    case FrameType::heartbeat: return "HEARTBEAT";
    case FrameType::join_req: return "JOIN_REQ";
    case FrameType::view_propose: return "VIEW_PROPOSE";
    case FrameType::view_ack: return "VIEW_ACK";
    case FrameType::flush_cut: return "FLUSH_CUT";
    case FrameType::flush_vec: return "FLUSH_VEC";
    case FrameType::view_install: return "VIEW_INSTALL";
    case FrameType::leave: return "LEAVE";
    case FrameType::probe: return "PROBE";
    case FrameType::p2p: return "P2P";
  }
  return "?";
}

bool has_magic(ByteView frame) {
  return frame.size() >= 5 && std::equal(kMagic.begin(), kMagic.end(), frame.begin());
}

Writer start_frame(FrameType type, const GroupId& group) {
  Writer w;
  w.raw(as_bytes(kMagic));
  w.u8(static_cast<std::uint8_t>(type));
  w.str8(group);
  return w;
}

Bytes finish_signed(Writer& w, const identity::Identity& id) {
  auto sig = id.sign(w.bytes());
  w.raw(sig);
  return w.take();
}

Envelope parse_envelope(ByteView frame) {
  if (!has_magic(frame)) throw Error(Errc::decode, "bad frame magic");
  Envelope env;
  auto t = frame[4];
  if (t < 1 || t > 12) throw Error(Errc::decode, "unknown frame type");
  env.type = static_cast<FrameType>(t);
  if (env.type == FrameType::p2p || env.type == FrameType::data) {
    throw Error(Errc::decode, "frame type has no signed envelope");
  }
  if (frame.size() < 5 + 1 + crypto::kSignatureSize) throw Error(Errc::decode, "frame too short");
  env.signed_part = frame.first(frame.size() - crypto::kSignatureSize);
  std::copy(frame.end() - crypto::kSignatureSize, frame.end(), env.signature.begin());
  Reader r(env.signed_part.subspan(5));
  env.group = r.str8();
  env.body = env.signed_part.subspan(5 + r.offset());
  return env;
}

bool superior(const ViewId& a, const ViewId& b) {
  return a.epoch > b.epoch || (a.epoch == b.epoch && a.initiator < b.initiator);
}

// ---- DATA ----

Bytes DataHeader::encode() const {
  Writer w = start_frame(FrameType::data, group);
  view.encode(w);
  sender.encode(w);
  w.u64(seq);
  w.u64(ts);
  std::uint8_t flags = static_cast<std::uint8_t>(mode);
  if (control) flags |= kFlagControl;
  if (sealed) flags |= kFlagSealed;
  w.u8(flags);
  w.u16(frag_index);
  w.u16(frag_count);
  return w.take();
}

DataFrame DataFrame::decode(ByteView frame) {
  if (!has_magic(frame) || frame[4] != static_cast<std::uint8_t>(FrameType::data)) {
    throw Error(Errc::decode, "not a DATA frame");
  }
  DataFrame f;
  Reader r(frame.subspan(5));
  auto& h = f.header;
  h.group = r.str8();
  h.view = ViewId::decode(r);
  h.sender = ProcessId::decode(r);
  h.seq = r.u64();
  h.ts = r.u64();
  auto flags = r.u8();
  auto mode = flags & 0x3F;
  if (mode != 1 && mode != 2) throw Error(Errc::decode, "bad delivery mode");
  h.mode = static_cast<ordcast::Mode>(mode);
  h.control = (flags & kFlagControl) != 0;
  h.sealed = (flags & kFlagSealed) != 0;
  h.frag_index = r.u16();
  h.frag_count = r.u16();
  if (h.frag_count == 0 || h.frag_index >= h.frag_count || h.seq == 0) throw Error(Errc::decode, "bad fragment");
  std::size_t header_len = 5 + r.offset();
  f.header_bytes = frame.first(header_len);
  if (h.sealed) {
    f.sealed = sgl::SealedMessage::read(r);
    r.expect_done();
  } else {
    f.payload = r.blob16();
    f.signed_part = frame.first(5 + r.offset());
    f.signature = r.fixed<64>();
    r.expect_done();
  }
  return f;
}

Bytes encode_sealed_data(const DataHeader& h, sgl::Sealer& sealer, ByteView fragment) {
  auto header = h.encode();
  auto sealed = sealer.seal(fragment, header);
  if (!sealed) throw sealed.error();
  Writer w;
  w.raw(header);
  sealed->write(w);
  return w.take();
}

Bytes encode_signed_data(const DataHeader& h, ByteView payload, const identity::Identity& id) {
  Writer w;
  w.raw(h.encode());
  w.blob16(payload);
  return finish_signed(w, id);
}

// ---- control frames ----

Bytes Heartbeat::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::heartbeat, group);
  view.encode(w);
  sender.encode(w);
  w.u64(ts);
  w.u64(max_seq);
  put_vec(w, delivered);
  return finish_signed(w, id);
}

Heartbeat Heartbeat::decode(const Envelope& env) {
  Reader r(env.body);
  Heartbeat h;
  h.group = env.group;
  h.view = ViewId::decode(r);
  h.sender = ProcessId::decode(r);
  h.ts = r.u64();
  h.max_seq = r.u64();
  h.delivered = get_vec(r);
  r.expect_done();
  return h;
}

Bytes Nack::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::nack, group);
  view.encode(w);
  requester.encode(w);
  target.encode(w);
  w.u16(static_cast<std::uint16_t>(ranges.size()));
  for (const auto& rg : ranges) {
    w.u64(rg.from);
    w.u64(rg.to);
  }
  return finish_signed(w, id);
}

Nack Nack::decode(const Envelope& env) {
  Reader r(env.body);
  Nack n;
  n.group = env.group;
  n.view = ViewId::decode(r);
  n.requester = ProcessId::decode(r);
  n.target = ProcessId::decode(r);
  auto count = r.u16();
  for (std::uint16_t i = 0; i < count; ++i) {
    ordcast::SeqRange rg;
    rg.from = r.u64();
    rg.to = r.u64();
    if (rg.from == 0 || rg.to < rg.from) throw Error(Errc::decode, "bad NACK range");
    n.ranges.push_back(rg);
  }
  r.expect_done();
  return n;
}

Bytes JoinReq::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::join_req, group);
  joiner.encode(w);
  w.u64(max_epoch);
  put_cert(w, cert);
  return finish_signed(w, id);
}

JoinReq JoinReq::decode(const Envelope& env) {
  Reader r(env.body);
  JoinReq j;
  j.group = env.group;
  j.joiner = ProcessId::decode(r);
  j.max_epoch = r.u64();
  j.cert = get_cert(r);
  r.expect_done();
  return j;
}

Bytes Propose::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::view_propose, view.group);
  put_view_body(w, view);
  proposer.encode(w);
  put_cert(w, cert);
  return finish_signed(w, id);
}

Propose Propose::decode(const Envelope& env) {
  Reader r(env.body);
  Propose p;
  p.view = get_view_body(r, env.group);
  p.proposer = ProcessId::decode(r);
  p.cert = get_cert(r);
  r.expect_done();
  return p;
}

Bytes Ack::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::view_ack, group);
  proposal.encode(w);
  acker.encode(w);
  w.u8(accept ? 1 : 0);
  w.u64(max_epoch);
  w.u8(old_view ? 1 : 0);
  if (old_view) {
    put_view_body(w, *old_view);
    put_vec(w, contiguous);
  }
  put_cert(w, cert);
  return finish_signed(w, id);
}

Ack Ack::decode(const Envelope& env) {
  Reader r(env.body);
  Ack a;
  a.group = env.group;
  a.proposal = ViewId::decode(r);
  a.acker = ProcessId::decode(r);
  a.accept = r.u8() != 0;
  a.max_epoch = r.u64();
  if (r.u8() != 0) {
    a.old_view = get_view_body(r, env.group);
    a.contiguous = get_vec(r);
    if (a.contiguous.size() != a.old_view->members.size()) throw Error(Errc::decode, "ack vector size mismatch");
  }
  a.cert = get_cert(r);
  r.expect_done();
  return a;
}

Bytes FlushCut::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::flush_cut, group);
  proposal.encode(w);
  coordinator.encode(w);
  w.u16(static_cast<std::uint16_t>(cuts.size()));
  for (const auto& c : cuts) {
    c.old_view.encode(w);
    w.u16(static_cast<std::uint16_t>(c.cut.size()));
    for (std::size_t i = 0; i < c.cut.size(); ++i) {
      w.u64(c.cut[i]);
      c.provider[i].encode(w);
    }
  }
  return finish_signed(w, id);
}

FlushCut FlushCut::decode(const Envelope& env) {
  Reader r(env.body);
  FlushCut f;
  f.group = env.group;
  f.proposal = ViewId::decode(r);
  f.coordinator = ProcessId::decode(r);
  auto count = r.u16();
  for (std::uint16_t i = 0; i < count; ++i) {
    ordcast::OldViewCut c;
    c.old_view = ViewId::decode(r);
    auto n = r.u16();
    for (std::uint16_t k = 0; k < n; ++k) {
      c.cut.push_back(r.u64());
      c.provider.push_back(ProcessId::decode(r));
    }
    f.cuts.push_back(std::move(c));
  }
  r.expect_done();
  return f;
}

Bytes FlushVec::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::flush_vec, group);
  proposal.encode(w);
  reporter.encode(w);
  put_vec(w, delivered);
  return finish_signed(w, id);
}

FlushVec FlushVec::decode(const Envelope& env) {
  Reader r(env.body);
  FlushVec f;
  f.group = env.group;
  f.proposal = ViewId::decode(r);
  f.reporter = ProcessId::decode(r);
  f.delivered = get_vec(r);
  r.expect_done();
  return f;
}

Bytes Install::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::view_install, view.group);
  put_view_body(w, view);
  coordinator.encode(w);
  w.u16(static_cast<std::uint16_t>(certs.size()));
  for (const auto& c : certs) put_cert(w, c);
  return finish_signed(w, id);
}

Install Install::decode(const Envelope& env) {
  Reader r(env.body);
  Install i;
  i.view = get_view_body(r, env.group);
  i.coordinator = ProcessId::decode(r);
  auto n = r.u16();
  for (std::uint16_t k = 0; k < n; ++k) i.certs.push_back(get_cert(r));
  r.expect_done();
  return i;
}

Bytes Leave::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::leave, group);
  view.encode(w);
  leaver.encode(w);
  put_cert(w, cert);
  return finish_signed(w, id);
}

Leave Leave::decode(const Envelope& env) {
  Reader r(env.body);
  Leave l;
  l.group = env.group;
  l.view = ViewId::decode(r);
  l.leaver = ProcessId::decode(r);
  l.cert = get_cert(r);
  r.expect_done();
  return l;
}

Bytes Probe::encode(const identity::Identity& id) const {
  auto w = start_frame(FrameType::probe, view.group);
  put_view_body(w, view);
  sender.encode(w);
  put_cert(w, cert);
  return finish_signed(w, id);
}

Probe Probe::decode(const Envelope& env) {
  Reader r(env.body);
  Probe p;
  p.view = get_view_body(r, env.group);
  p.sender = ProcessId::decode(r);
  p.cert = get_cert(r);
  r.expect_done();
  return p;
}

Bytes P2PFrame::encode() const {
  Writer w;
  w.raw(as_bytes(kMagic));
  w.u8(static_cast<std::uint8_t>(FrameType::p2p));
  put_cert(w, sender);
  w.raw(recipient);
  w.raw(nonce);
  w.blob32(boxed);
  return w.take();
}

P2PFrame P2PFrame::decode(ByteView frame) {
  if (!has_magic(frame) || frame[4] != static_cast<std::uint8_t>(FrameType::p2p)) {
    throw Error(Errc::decode, "not a P2P frame");
  }
  Reader r(frame.subspan(5));
  P2PFrame f;
  f.sender = get_cert(r);
  f.recipient = r.fixed<32>();
  f.nonce = r.fixed<crypto::kBoxNonceSize>();
  f.boxed = r.blob32();
  r.expect_done();
  return f;
}

}  // namespace collab::group
