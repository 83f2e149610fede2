#include "collab/identity/trust.hpp"

#include <algorithm>

namespace collab::identity {

std::string_view trust_mode_name(TrustMode mode) {
  return mode == TrustMode::registered ? "registered" : "incremental";
}

void TrustStore::add_root(const IdentityCert& root) {
  if (!root.self_signed() || !root.signed_by(root.public_key)) {
    throw Error(Errc::bad_signature, "root certificate for '" + root.subject + "' is not validly self-signed");
  }
  roots_.push_back(root);
}

Status TrustStore::check_pin(const IdentityCert& cert) const {
  auto fp = cert.fingerprint();
  if (auto it = pins_by_subject_.find(cert.subject); it != pins_by_subject_.end() && it->second.fingerprint != fp) {
    return Error(Errc::pin_mismatch, "key for '" + cert.subject + "' differs from the pinned key");
  }
  if (auto it = subject_by_fingerprint_.find(fp); it != subject_by_fingerprint_.end() && it->second != cert.subject) {
    return Error(Errc::pin_mismatch, "key is pinned to subject '" + it->second + "'");
  }
  return ok_status();
}

void TrustStore::pin(const IdentityCert& cert, std::int64_t now) {
  if (pins_by_subject_.count(cert.subject) != 0) return;
  pins_by_subject_[cert.subject] = Pin{cert.fingerprint(), cert.subject, now};
  subject_by_fingerprint_[cert.fingerprint()] = cert.subject;
}

Result<std::string> TrustStore::verify_cert(const IdentityCert& cert, std::int64_t now) {
  if (cert.expires <= cert.issued) return Error(Errc::expired, "certificate validity window is empty");
  if (now > cert.expires) return Error(Errc::expired, "certificate for '" + cert.subject + "' has expired");
  if (now < cert.issued) return Error(Errc::expired, "certificate for '" + cert.subject + "' is not yet valid");

  for (const auto& root : roots_) {
    if (root == cert) return cert.subject;
  }
  if (!cert.self_signed()) {
    auto root = std::find_if(roots_.begin(), roots_.end(), [&](const auto& r) { return r.subject == cert.issuer; });
    if (root == roots_.end()) return Error(Errc::untrusted, "issuer '" + cert.issuer + "' is not a registered root");
    if (!cert.signed_by(root->public_key)) return Error(Errc::bad_signature, "certificate signature invalid");
    if (mode_ == TrustMode::incremental) {
      if (auto st = check_pin(cert); !st) return st.error();
      pin(cert, now);
    }
    return cert.subject;
  }
  if (!cert.signed_by(cert.public_key)) return Error(Errc::bad_signature, "self-signature invalid");
  if (mode_ == TrustMode::registered) {
    return Error(Errc::untrusted, "self-signed certificate for '" + cert.subject + "' in registered mode");
  }
  if (auto st = check_pin(cert); !st) return st.error();
  pin(cert, now);
  return cert.subject;
}

nlohmann::json TrustStore::pins_to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& [subject, p] : pins_by_subject_) {
    arr.push_back({{"subject", subject}, {"fingerprint", fingerprint_hex(p.fingerprint)}, {"first_seen", p.first_seen}});
  }
  return arr;
}

void TrustStore::load_pins(const nlohmann::json& doc) {
  for (const auto& p : doc) {
    Pin pin{fingerprint_from_hex(p.at("fingerprint").get<std::string>()), p.at("subject").get<std::string>(),
            p.value("first_seen", std::int64_t{0})};
    subject_by_fingerprint_[pin.fingerprint] = pin.subject;
    pins_by_subject_[pin.subject] = std::move(pin);
  }
}

}  // namespace collab::identity
