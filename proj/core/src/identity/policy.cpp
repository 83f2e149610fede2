#include "collab/identity/policy.hpp"

#include <fnmatch.h>

#include <algorithm>

#include "collab/common/error.hpp"

namespace collab::identity {

using nlohmann::json;

namespace {

void put_list(Writer& w, const std::vector<std::string>& items) {
  w.u16(static_cast<std::uint16_t>(items.size()));
  for (const auto& s : items) w.blob16(as_bytes(s));
}

}  // namespace

bool glob_match(std::string_view pattern, std::string_view name) {
  std::string p(pattern);
  std::string n(name);
  return fnmatch(p.c_str(), n.c_str(), 0) == 0;
}

Bytes PolicyDocument::tbs_bytes() const {
  Writer w;
  w.raw(as_bytes("collab-policy-v1"));
  w.blob16(as_bytes(resource_pattern));
  put_list(w, allow_subjects);
  put_list(w, require_attributes);
  w.blob16(as_bytes(stakeholder));
  return w.take();
}

void PolicyDocument::sign(const Identity& stakeholder_identity) {
  stakeholder = stakeholder_identity.cert.subject;
  signature = stakeholder_identity.sign(tbs_bytes());
}

bool PolicyDocument::verify(const crypto::PublicKey& stakeholder_key) const {
  return crypto::verify(stakeholder_key, tbs_bytes(), signature);
}

json PolicyDocument::to_json() const {
  return json{{"resource_pattern", resource_pattern},
              {"allow_subjects", allow_subjects},
              {"require_attributes", require_attributes},
              {"stakeholder", stakeholder},
              {"signature", to_hex(signature)}};
}

PolicyDocument PolicyDocument::from_json(const json& doc) {
  try {
    PolicyDocument p;
    p.resource_pattern = doc.at("resource_pattern").get<std::string>();
    p.allow_subjects = doc.value("allow_subjects", std::vector<std::string>{});
    p.require_attributes = doc.value("require_attributes", std::vector<std::string>{});
    p.stakeholder = doc.at("stakeholder").get<std::string>();
    p.signature = array_from_hex<64>(doc.at("signature").get<std::string>());
    return p;
  } catch (const json::exception& e) {
    throw Error(Errc::decode, std::string("malformed policy: ") + e.what());
  }
}

AuthzDecision authorize(std::string_view resource, std::string_view subject,
                        const std::set<std::string>& assertions, std::span<const PolicyEntry> policies) {
  AuthzDecision decision;
  bool matched_verified = false;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    const auto& entry = policies[i];
    if (!glob_match(entry.doc.resource_pattern, resource)) continue;
    if (!entry.verified) {
      decision.skipped.push_back(i);
      continue;
    }
    matched_verified = true;
    const auto& doc = entry.doc;
    bool listed = std::find(doc.allow_subjects.begin(), doc.allow_subjects.end(), subject) != doc.allow_subjects.end();
    bool attrs_ok = !doc.require_attributes.empty() &&
                    std::all_of(doc.require_attributes.begin(), doc.require_attributes.end(),
                                [&](const std::string& a) { return assertions.count(a) != 0; });
    if (listed || attrs_ok) {
      decision.allow = true;
      decision.reason = "rule:" + std::to_string(i);
      return decision;
    }
  }
  if (matched_verified) {
    decision.reason = "attribute-missing";
  } else if (!decision.skipped.empty()) {
    decision.reason = "bad-signature";
  } else {
    decision.reason = "no-policy";
  }
  return decision;
}

Bytes AttributeAssertion::tbs_bytes() const {
  Writer w;
  w.raw(as_bytes("collab-attr-v1"));
  w.blob16(as_bytes(subject));
  put_list(w, attributes);
  w.blob16(as_bytes(stakeholder));
  return w.take();
}

void AttributeAssertion::sign(const Identity& stakeholder_identity) {
  stakeholder = stakeholder_identity.cert.subject;
  signature = stakeholder_identity.sign(tbs_bytes());
}

bool AttributeAssertion::verify(const crypto::PublicKey& stakeholder_key) const {
  return crypto::verify(stakeholder_key, tbs_bytes(), signature);
}

json AttributeAssertion::to_json() const {
  return json{{"subject", subject},
              {"attributes", attributes},
              {"stakeholder", stakeholder},
              {"signature", to_hex(signature)}};
}

AttributeAssertion AttributeAssertion::from_json(const json& doc) {
  try {
    AttributeAssertion a;
    a.subject = doc.at("subject").get<std::string>();
    a.attributes = doc.value("attributes", std::vector<std::string>{});
    a.stakeholder = doc.at("stakeholder").get<std::string>();
    a.signature = array_from_hex<64>(doc.at("signature").get<std::string>());
    return a;
  } catch (const json::exception& e) {
    throw Error(Errc::decode, std::string("malformed attribute assertion: ") + e.what());
  }
}

void PolicyEngine::add_stakeholder(const IdentityCert& cert) { stakeholders_[cert.subject] = cert.public_key; }

std::optional<crypto::PublicKey> PolicyEngine::key_of(const std::string& stakeholder) const {
  auto it = stakeholders_.find(stakeholder);
  if (it == stakeholders_.end()) return std::nullopt;
  return it->second;
}

void PolicyEngine::add_policy(PolicyDocument doc) {
  auto key = key_of(doc.stakeholder);
  bool ok = key.has_value() && doc.verify(*key);
  policies_.push_back(PolicyEntry{std::move(doc), ok});
}

void PolicyEngine::add_assertion(const AttributeAssertion& assertion) {
  auto key = key_of(assertion.stakeholder);
  if (!key || !assertion.verify(*key)) return;
  auto& attrs = attributes_[assertion.subject];
  attrs.insert(assertion.attributes.begin(), assertion.attributes.end());
}

std::set<std::string> PolicyEngine::attributes_of(std::string_view subject) const {
  auto it = attributes_.find(subject);
  return it == attributes_.end() ? std::set<std::string>{} : it->second;
}

AuthzDecision PolicyEngine::authorize(std::string_view resource, std::string_view subject) const {
  return identity::authorize(resource, subject, attributes_of(subject), policies_);
}

}  // namespace collab::identity
