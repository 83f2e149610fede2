#pragma once

#include <map>
#include <string>
#include <vector>

#include "collab/common/error.hpp"
#include "collab/identity/cert.hpp"

namespace collab::identity {

enum class TrustMode { registered, incremental };

std::string_view trust_mode_name(TrustMode mode);

struct Pin {
  Fingerprint fingerprint{};
  std::string subject;
  std::int64_t first_seen = 0;
};

// Registered roots plus, in incremental mode, trust-on-first-use pins. A
// subject, once pinned, only ever verifies with its pinned key.
class TrustStore {
 public:
  explicit TrustStore(TrustMode mode) : mode_(mode) {}

  TrustMode mode() const { return mode_; }

  // Roots must be self-signed with a valid signature.
  void add_root(const IdentityCert& root);
  const std::vector<IdentityCert>& roots() const { return roots_; }

  // Returns the subject on success; EXPIRED, BAD_SIGNATURE, PIN_MISMATCH or
  // UNTRUSTED otherwise. Pins new self-signed identities in incremental mode.
  Result<std::string> verify_cert(const IdentityCert& cert, std::int64_t now);

  const std::map<std::string, Pin>& pins() const { return pins_by_subject_; }

  nlohmann::json pins_to_json() const;
  void load_pins(const nlohmann::json& doc);

 private:
  Status check_pin(const IdentityCert& cert) const;
  void pin(const IdentityCert& cert, std::int64_t now);

  TrustMode mode_;
  std::vector<IdentityCert> roots_;
  std::map<std::string, Pin> pins_by_subject_;
  std::map<Fingerprint, std::string> subject_by_fingerprint_;
};

}  // namespace collab::identity
