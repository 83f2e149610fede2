#include "collab/group/node.hpp"

#include <chrono>

namespace collab::group {

namespace {
constexpr netsim::SimTime kLeftReplyInterval = 1000;
}

Node::Node(netsim::Transport& transport, identity::Identity id, std::shared_ptr<crypto::RandomSource> rng,
           NodeOptions options)
    : transport_(transport),
      id_(std::move(id)),
      rng_(std::move(rng)),
      options_(std::move(options)),
      pid_{id_.fingerprint(), transport.local_addr()},
      trust_(options_.trust_mode) {
  certs_[id_.fingerprint()] = id_.cert;
  if (options_.trust_mode == identity::TrustMode::incremental) {
    (void)trust_.verify_cert(id_.cert, cert_now());
  }
  transport_.set_receiver([this](const netsim::Datagram& d) { on_datagram(d); });
}

Node::~Node() {
  transport_.set_receiver(nullptr);
  if (reap_timer_) transport_.cancel(*reap_timer_);
}

std::int64_t Node::cert_now() const {
  if (options_.cert_clock) return options_.cert_clock();
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

GroupSession& Node::join(const GroupId& group, std::optional<netsim::EndpointAddr> contact, GroupCallbacks callbacks,
                         GroupOptions options) {
  if (groups_.count(group) != 0) throw Error(Errc::precondition, "already joined " + group);
  auto session = std::make_unique<GroupSession>(*this, group, std::move(callbacks), std::move(options));
  auto& ref = *session;
  groups_[group] = std::move(session);
  left_.erase(group);
  ref.start(contact);
  return ref;
}

Status Node::leave(const GroupId& group) {
  auto it = groups_.find(group);
  if (it == groups_.end()) return Error(Errc::not_member, "not a member of " + group);
  auto session = std::move(it->second);
  groups_.erase(it);
  Left l;
  if (session->view()) l.view = session->view()->id;
  left_[group] = std::move(l);
  session->leave_now();
  graveyard_.push_back(std::move(session));
  reap();
  return ok_status();
}

void Node::reap() {
  if (reap_timer_) return;
  // Sessions may be leaving from inside their own callbacks.
  reap_timer_ = transport_.schedule(0, [this] {
    reap_timer_.reset();
    graveyard_.clear();
  });
}

GroupSession* Node::group(const GroupId& group) {
  auto it = groups_.find(group);
  return it == groups_.end() ? nullptr : it->second.get();
}

std::vector<GroupId> Node::groups() const {
  std::vector<GroupId> out;
  for (const auto& [name, s] : groups_) out.push_back(name);
  return out;
}

Status Node::learn_cert(const identity::IdentityCert& cert) {
  auto fp = cert.fingerprint();
  if (auto it = certs_.find(fp); it != certs_.end() && it->second == cert) return ok_status();
  auto r = trust_.verify_cert(cert, cert_now());
  if (!r) {
    ++stats_.untrusted;
    return r.error();
  }
  certs_[fp] = cert;
  return ok_status();
}

const identity::IdentityCert* Node::cert_of(const identity::Fingerprint& fp) const {
  auto it = certs_.find(fp);
  return it == certs_.end() ? nullptr : &it->second;
}

bool Node::verify_from(const ProcessId& signer, ByteView signed_part, const crypto::Signature& sig) {
  const auto* cert = cert_of(signer.fingerprint);
  if (cert == nullptr || !crypto::verify(cert->public_key, signed_part, sig)) {
    ++stats_.bad_signatures;
    return false;
  }
  return true;
}

void Node::send(const netsim::EndpointAddr& dst, Bytes frame) { transport_.send(dst, frame); }

Bytes Node::seal_for(const identity::IdentityCert& recipient, ByteView payload) {
  P2PFrame f;
  f.sender = id_.cert;
  f.recipient = recipient.fingerprint();
  f.nonce = rng_->array<crypto::kBoxNonceSize>();
  f.boxed = crypto::box_seal(id_.secret, recipient.public_key, f.nonce, payload);
  return f.encode();
}

Result<Opened> Node::open_sealed(ByteView frame) {
  P2PFrame f;
  try {
    f = P2PFrame::decode(frame);
  } catch (const Error& e) {
    return e;
  }
  if (f.recipient != id_.fingerprint()) return Error(Errc::not_found, "frame addressed to another identity");
  if (auto st = learn_cert(f.sender); !st) return st.error();
  auto plain = crypto::box_open(id_.secret, f.sender.public_key, f.nonce, f.boxed);
  if (!plain) return Error(Errc::auth_fail, "box failed to open");
  return Opened{std::move(f.sender), std::move(*plain)};
}

Status Node::send_p2p(const netsim::EndpointAddr& dst, const identity::IdentityCert& recipient,
                      const std::string& service, ByteView payload) {
  Writer inner;
  inner.str8(service);
  inner.blob32(payload);
  auto frame = seal_for(recipient, inner.bytes());
  if (frame.size() > netsim::kMaxDatagram) return Error(Errc::oversize, "p2p message too large for a datagram");
  ++stats_.p2p_sent;
  transport_.send(dst, frame);
  return ok_status();
}

void Node::on_p2p(const std::string& service, std::function<void(const P2PMessage&)> handler) {
  p2p_handlers_[service] = std::move(handler);
}

void Node::handle_p2p(const netsim::Datagram& d) {
  auto opened = open_sealed(d.payload);
  if (!opened) {
    if (opened.code() == Errc::decode) {
      ++stats_.malformed;
    } else {
      ++stats_.p2p_rejected;
    }
    return;
  }
  P2PMessage msg;
  try {
    Reader r(opened->payload);
    msg.service = r.str8();
    msg.payload = r.blob32();
    r.expect_done();
  } catch (const Error&) {
    ++stats_.malformed;
    return;
  }
  msg.sender = std::move(opened->sender);
  msg.from = d.src;
  ++stats_.p2p_received;
  auto it = p2p_handlers_.find(msg.service);
  if (it != p2p_handlers_.end()) it->second(msg);
}

void Node::reply_left(const GroupId& group, const netsim::EndpointAddr& to) {
  auto it = left_.find(group);
  if (it == left_.end()) return;
  auto& last = it->second.replied[to];
  auto t = transport_.now();
  if (last != 0 && t - last < kLeftReplyInterval) return;
  last = t == 0 ? 1 : t;
  Leave l{group, it->second.view, pid_, id_.cert};
  transport_.send(to, l.encode(id_));
}

void Node::on_datagram(const netsim::Datagram& d) {
  if (!has_magic(d.payload) || d.payload.size() < 5) {
    ++stats_.malformed;
    return;
  }
  auto type = static_cast<FrameType>(d.payload[4]);
  if (type == FrameType::p2p) {
    handle_p2p(d);
    return;
  }
  if (type == FrameType::data) {
    GroupId group;
    try {
      Reader r(ByteView(d.payload).subspan(5));
      group = r.str8();
    } catch (const Error&) {
      ++stats_.malformed;
      return;
    }
    if (auto* s = this->group(group)) {
      s->handle_data(d);
    } else {
      ++stats_.unknown_group;
      reply_left(group, d.src);
    }
    return;
  }
  Envelope env;
  try {
    env = parse_envelope(d.payload);
  } catch (const Error&) {
    ++stats_.malformed;
    return;
  }
  auto* s = group(env.group);
  if (s == nullptr) {
    ++stats_.unknown_group;
    if (type != FrameType::leave) reply_left(env.group, d.src);
    return;
  }
  s->handle_frame(env, d);
}

}  // namespace collab::group
