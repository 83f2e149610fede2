#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "collab/common/error.hpp"
#include "collab/sgl/algebra.hpp"
#include "collab/sgl/keys.hpp"

namespace collab::sgl {

enum class FlowKind : std::uint8_t { upflow = 1, downflow = 2 };

// One GDH.2 message. Upflows go to a single member; the downflow is multicast.
struct KeyFlow {
  FlowKind kind = FlowKind::upflow;
  std::string group;
  std::uint64_t epoch = 0;
  std::uint16_t sender = 0;  // index in the ordered member list
  std::vector<Bytes> elements;
  crypto::Signature signature{};

  Bytes tbs_bytes() const;
  Bytes encode() const;
  static KeyFlow decode(ByteView wire);
  void sign(const crypto::SecretKey& key);
  bool verify(const crypto::PublicKey& key) const;
};

enum class GdhPhase { upflow, downflow, done, failed };

// Chained upflow/downflow agreement for one view. Members are indexed
// 0..n-1 in ProcessId order; index 0 starts.
class GdhSession {
 public:
  GdhSession(std::shared_ptr<const GroupAlgebra> algebra, std::string group, std::uint64_t epoch, std::size_t n,
             std::size_t my_index, Scalar secret);

  // Member 0 only: the first upflow, or nothing for a singleton view.
  std::optional<KeyFlow> start();

  // Consumes a verified flow. May return a flow to send on (next upflow, or
  // the downflow from the last member). MISSING_PARTIAL / DECODE / PRECONDITION
  // abort the session.
  Result<std::optional<KeyFlow>> on_flow(const KeyFlow& flow);

  GdhPhase phase() const { return phase_; }
  bool done() const { return phase_ == GdhPhase::done; }
  std::size_t my_index() const { return me_; }
  std::size_t size() const { return n_; }
  std::uint64_t epoch() const { return epoch_; }
  // Index that must send the next flow this member is waiting for.
  std::size_t awaiting_from() const;

  const Bytes& shared_element() const { return shared_; }
  KeyMaterial keys() const;

 private:
  Error fail(Errc code, const std::string& what);
  KeyFlow make_flow(FlowKind kind, std::vector<Bytes> elements) const;
  std::optional<KeyFlow> finish_as_last(const std::vector<Bytes>& upflow);

  std::shared_ptr<const GroupAlgebra> alg_;
  std::string group_;
  std::uint64_t epoch_;
  std::size_t n_;
  std::size_t me_;
  Scalar x_;
  GdhPhase phase_ = GdhPhase::upflow;
  Bytes shared_;
};

}  // namespace collab::sgl
