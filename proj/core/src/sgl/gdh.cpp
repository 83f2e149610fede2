#include "collab/sgl/gdh.hpp"

namespace collab::sgl {

Bytes KeyFlow::tbs_bytes() const {
  Writer w;
  w.raw(as_bytes("sgl-flow"));
  w.u8(static_cast<std::uint8_t>(kind));
  w.blob16(as_bytes(group));
  w.u64(epoch);
  w.u16(sender);
  w.u16(static_cast<std::uint16_t>(elements.size()));
  for (const auto& e : elements) w.blob16(e);
  return w.take();
}

Bytes KeyFlow::encode() const {
  Bytes out = tbs_bytes();
  out.erase(out.begin(), out.begin() + 8);  // drop the domain prefix
  out.insert(out.end(), signature.begin(), signature.end());
  return out;
}

KeyFlow KeyFlow::decode(ByteView wire) {
  Reader r(wire);
  KeyFlow f;
  auto kind = r.u8();
  if (kind != 1 && kind != 2) throw Error(Errc::decode, "unknown key flow kind");
  f.kind = static_cast<FlowKind>(kind);
  f.group = to_string(r.blob16());
  f.epoch = r.u64();
  f.sender = r.u16();
  auto count = r.u16();
  for (std::uint16_t i = 0; i < count; ++i) f.elements.push_back(r.blob16());
  f.signature = r.fixed<64>();
  r.expect_done();
  return f;
}

void KeyFlow::sign(const crypto::SecretKey& key) { signature = crypto::sign(key, tbs_bytes()); }

bool KeyFlow::verify(const crypto::PublicKey& key) const { return crypto::verify(key, tbs_bytes(), signature); }

GdhSession::GdhSession(std::shared_ptr<const GroupAlgebra> algebra, std::string group, std::uint64_t epoch,
                       std::size_t n, std::size_t my_index, Scalar secret)
    : alg_(std::move(algebra)), group_(std::move(group)), epoch_(epoch), n_(n), me_(my_index), x_(std::move(secret)) {
  if (n == 0 || my_index >= n || n > 0xFFFF) throw Error(Errc::invalid_argument, "bad key agreement membership");
}

std::size_t GdhSession::awaiting_from() const {
  if (phase_ == GdhPhase::upflow && me_ > 0) return me_ - 1;
  return n_ - 1;
}

Error GdhSession::fail(Errc code, const std::string& what) {
  phase_ = GdhPhase::failed;
  x_ = Scalar();
  return Error(code, what);
}

KeyFlow GdhSession::make_flow(FlowKind kind, std::vector<Bytes> elements) const {
  KeyFlow f;
  f.kind = kind;
  f.group = group_;
  f.epoch = epoch_;
  f.sender = static_cast<std::uint16_t>(me_);
  f.elements = std::move(elements);
  return f;
}

std::optional<KeyFlow> GdhSession::start() {
  if (me_ != 0 || phase_ != GdhPhase::upflow) throw Error(Errc::precondition, "only member 0 starts agreement");
  auto g = alg_->generator();
  auto gx = alg_->exp(g, x_);
  if (n_ == 1) {
    shared_ = std::move(gx);
    phase_ = GdhPhase::done;
    return std::nullopt;
  }
  phase_ = GdhPhase::downflow;
  return make_flow(FlowKind::upflow, {std::move(g), std::move(gx)});
}

std::optional<KeyFlow> GdhSession::finish_as_last(const std::vector<Bytes>& up) {
  // up = [missing_0 .. missing_{n-2} (all without x_{n-1}), full product of x_0..x_{n-2}]
  std::vector<Bytes> down;
  down.reserve(n_);
  for (std::size_t j = 0; j + 1 < up.size(); ++j) down.push_back(alg_->exp(up[j], x_));
  down.push_back(up.back());
  shared_ = alg_->exp(up.back(), x_);
  phase_ = GdhPhase::done;
  return make_flow(FlowKind::downflow, std::move(down));
}

Result<std::optional<KeyFlow>> GdhSession::on_flow(const KeyFlow& flow) {
  if (phase_ == GdhPhase::done || phase_ == GdhPhase::failed) {
    return Error(Errc::precondition, "key agreement already finished");
  }
  if (flow.group != group_ || flow.epoch != epoch_) return Error(Errc::stale_epoch, "flow for another view");
  for (const auto& e : flow.elements) {
    if (!alg_->valid_element(e)) return fail(Errc::decode, "flow carries an invalid group element");
  }
  try {
    if (flow.kind == FlowKind::upflow) {
      if (phase_ != GdhPhase::upflow || me_ == 0) return Error(Errc::precondition, "unexpected upflow");
      if (flow.sender + 1u != me_) return Error(Errc::precondition, "upflow from a non-predecessor");
      if (flow.elements.size() != me_ + 1) return fail(Errc::missing_partial, "upflow has the wrong partial count");
      if (me_ + 1 == n_) return std::optional<KeyFlow>(finish_as_last(flow.elements));
      std::vector<Bytes> next;
      next.reserve(me_ + 2);
      for (std::size_t j = 0; j + 1 < flow.elements.size(); ++j) next.push_back(alg_->exp(flow.elements[j], x_));
      next.push_back(flow.elements.back());
      next.push_back(alg_->exp(flow.elements.back(), x_));
      phase_ = GdhPhase::downflow;
      return std::optional<KeyFlow>(make_flow(FlowKind::upflow, std::move(next)));
    }
    if (phase_ != GdhPhase::downflow) return Error(Errc::precondition, "downflow before own upflow");
    if (flow.sender + 1u != n_) return Error(Errc::precondition, "downflow not from the last member");
    if (flow.elements.size() != n_ || me_ >= flow.elements.size()) {
      return fail(Errc::missing_partial, "downflow lacks this member's partial");
    }
    shared_ = alg_->exp(flow.elements[me_], x_);
    phase_ = GdhPhase::done;
    return std::optional<KeyFlow>();
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  }
}

KeyMaterial GdhSession::keys() const {
  if (!done()) throw Error(Errc::precondition, "key agreement not complete");
  return derive_keys(shared_, group_, epoch_);
}

}  // namespace collab::sgl
