#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "collab/identity/cert.hpp"

namespace collab::identity {

// Flat allow-list policy over a glob of resource names, signed by the
// stakeholder that owns the resources.
struct PolicyDocument {
  std::string resource_pattern;
  std::vector<std::string> allow_subjects;
  std::vector<std::string> require_attributes;
  std::string stakeholder;
  crypto::Signature signature{};

  Bytes tbs_bytes() const;
  void sign(const Identity& stakeholder_identity);
  bool verify(const crypto::PublicKey& stakeholder_key) const;

  nlohmann::json to_json() const;
  static PolicyDocument from_json(const nlohmann::json& doc);
};

struct PolicyEntry {
  PolicyDocument doc;
  bool verified = false;
};

struct AuthzDecision {
  bool allow = false;
  // "rule:<index>" | "no-policy" | "attribute-missing" | "bad-signature"
  std::string reason;
  // Indices of matching policies that were skipped as unverifiable.
  std::vector<std::size_t> skipped;

  bool operator==(const AuthzDecision&) const = default;
};

// Shell-style glob; '*' also crosses '/'.
bool glob_match(std::string_view pattern, std::string_view name);

// Allow iff some verified policy matching the resource lists the subject or
// has a non-empty attribute requirement contained in `assertions`.
AuthzDecision authorize(std::string_view resource, std::string_view subject,
                        const std::set<std::string>& assertions, std::span<const PolicyEntry> policies);

// A stakeholder's signed statement that `subject` holds some attributes.
struct AttributeAssertion {
  std::string subject;
  std::vector<std::string> attributes;
  std::string stakeholder;
  crypto::Signature signature{};

  Bytes tbs_bytes() const;
  void sign(const Identity& stakeholder_identity);
  bool verify(const crypto::PublicKey& stakeholder_key) const;

  nlohmann::json to_json() const;
  static AttributeAssertion from_json(const nlohmann::json& doc);
};

// The policies and assertions one peer consults. Stakeholder keys resolve
// through the supplied certificates.
class PolicyEngine {
 public:
  void add_stakeholder(const IdentityCert& cert);
  // Unverifiable documents are kept and reported as skipped.
  void add_policy(PolicyDocument doc);
  void add_assertion(const AttributeAssertion& assertion);

  AuthzDecision authorize(std::string_view resource, std::string_view subject) const;
  std::set<std::string> attributes_of(std::string_view subject) const;
  const std::vector<PolicyEntry>& policies() const { return policies_; }

 private:
  std::optional<crypto::PublicKey> key_of(const std::string& stakeholder) const;

  std::map<std::string, crypto::PublicKey> stakeholders_;
  std::vector<PolicyEntry> policies_;
  std::map<std::string, std::set<std::string>, std::less<>> attributes_;
};

}  // namespace collab::identity
