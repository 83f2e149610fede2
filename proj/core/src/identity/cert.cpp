#include "collab/identity/cert.hpp"

#include <fstream>

#include "collab/common/error.hpp"

namespace collab::identity {

using nlohmann::json;

std::string fingerprint_hex(const Fingerprint& fp) { return to_hex(fp); }

Fingerprint fingerprint_from_hex(std::string_view hex) { return array_from_hex<32>(hex); }

Fingerprint fingerprint_of(const crypto::PublicKey& key) {
  return crypto::sha256(key);
}

Bytes IdentityCert::tbs_bytes() const {
  Writer w;
  w.u8(1);
  w.blob16(as_bytes(subject));
  w.raw(public_key);
  w.u64(static_cast<std::uint64_t>(issued));
  w.u64(static_cast<std::uint64_t>(expires));
  w.blob16(as_bytes(issuer));
  return w.take();
}

Bytes IdentityCert::canonical_bytes() const {
  Bytes out = tbs_bytes();
  out.insert(out.end(), signature.begin(), signature.end());
  return out;
}

IdentityCert IdentityCert::decode(ByteView canonical) {
  Reader r(canonical);
  if (r.u8() != 1) throw Error(Errc::decode, "unknown certificate version");
  IdentityCert c;
  c.subject = to_string(r.blob16());
  c.public_key = r.fixed<32>();
  c.issued = static_cast<std::int64_t>(r.u64());
  c.expires = static_cast<std::int64_t>(r.u64());
  c.issuer = to_string(r.blob16());
  c.signature = r.fixed<64>();
  r.expect_done();
  return c;
}

bool IdentityCert::signed_by(const crypto::PublicKey& key) const {
  return crypto::verify(key, tbs_bytes(), signature);
}

json IdentityCert::to_json() const {
  return json{{"subject", subject},         {"public_key", to_hex(public_key)}, {"issued", issued},
              {"expires", expires},         {"issuer", issuer},                 {"signature", to_hex(signature)}};
}

IdentityCert IdentityCert::from_json(const json& doc) {
  try {
    IdentityCert c;
    c.subject = doc.at("subject").get<std::string>();
    c.public_key = array_from_hex<32>(doc.at("public_key").get<std::string>());
    c.issued = doc.at("issued").get<std::int64_t>();
    c.expires = doc.at("expires").get<std::int64_t>();
    c.issuer = doc.at("issuer").get<std::string>();
    c.signature = array_from_hex<64>(doc.at("signature").get<std::string>());
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::decode, std::string("malformed certificate: ") + e.what());
  }
}

namespace {

Identity make_identity(std::string subject, crypto::RandomSource& rng, std::int64_t now, std::int64_t lifetime,
                       const Identity* issuer) {
  if (subject.empty()) throw Error(Errc::invalid_argument, "identity subject must not be empty");
  auto seed = rng.array<32>();
  auto kp = crypto::signing_keypair_from_seed(seed);
  crypto::secure_zero(seed);
  Identity id;
  id.cert.subject = std::move(subject);
  id.cert.public_key = kp.public_key;
  id.cert.issued = now;
  id.cert.expires = now + lifetime;
  id.cert.issuer = issuer != nullptr ? issuer->cert.subject : id.cert.subject;
  id.secret = kp.secret_key;
  const auto& signer = issuer != nullptr ? issuer->secret : id.secret;
  id.cert.signature = crypto::sign(signer, id.cert.tbs_bytes());
  return id;
}

}  // namespace

Identity new_identity(std::string subject, crypto::RandomSource& rng, std::int64_t now, std::int64_t lifetime) {
  return make_identity(std::move(subject), rng, now, lifetime, nullptr);
}

Identity new_identity_issued_by(const Identity& issuer, std::string subject, crypto::RandomSource& rng,
                                std::int64_t now, std::int64_t lifetime) {
  return make_identity(std::move(subject), rng, now, lifetime, &issuer);
}

void save_identity(const Identity& id, const std::filesystem::path& path) {
  json doc{{"cert", id.cert.to_json()}, {"secret_key", to_hex(id.secret.raw())}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write identity file " + path.string());
  out << doc.dump(2) << "\n";
  std::filesystem::permissions(path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write,
                               std::filesystem::perm_options::replace);
}

Identity load_identity(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot read identity file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(Errc::decode, "identity file is not valid JSON: " + std::string(e.what()));
  }
  Identity id;
  id.cert = IdentityCert::from_json(doc.at("cert"));
  auto raw = array_from_hex<64>(doc.at("secret_key").get<std::string>());
  id.secret = crypto::SecretKey(raw);
  crypto::secure_zero(raw);
  // Ed25519 secret keys embed the public key in their second half.
  if (!std::equal(id.cert.public_key.begin(), id.cert.public_key.end(), id.secret.raw().begin() + 32)) {
    throw Error(Errc::decode, "identity file secret key does not match certificate");
  }
  return id;
}

}  // namespace collab::identity
