#include <gtest/gtest.h>

#include <filesystem>

#include "collab/identity/cert.hpp"
#include "collab/identity/policy.hpp"
#include "collab/identity/trust.hpp"

using namespace collab;
using namespace collab::identity;

namespace {

constexpr std::int64_t kNow = 1'700'000'000'000;

struct IdentityTest : ::testing::Test {
  crypto::SeededRandom rng{7, "identity-test"};
};

}  // namespace

TEST_F(IdentityTest, FreshKeysGiveDistinctFingerprints) {
  auto a = new_identity("alice", rng, kNow);
  auto b = new_identity("alice", rng, kNow);
  EXPECT_NE(a.fingerprint(), b.fingerprint());
  EXPECT_EQ(fingerprint_hex(a.fingerprint()).size(), 64u);
}

TEST_F(IdentityTest, EmptySubjectRejected) {
  EXPECT_THROW(new_identity("", rng, kNow), Error);
}

TEST_F(IdentityTest, SelfSignedVerifiesAgainstItselfAsRoot) {
  auto a = new_identity("CN=alice", rng, kNow);
  TrustStore store(TrustMode::registered);
  store.add_root(a.cert);
  auto r = store.verify_cert(a.cert, kNow + 1);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(*r, "CN=alice");
}

TEST_F(IdentityTest, CanonicalRoundTrip) {
  auto a = new_identity("alice", rng, kNow);
  auto bytes = a.cert.canonical_bytes();
  auto back = IdentityCert::decode(bytes);
  EXPECT_EQ(back, a.cert);
  EXPECT_EQ(back.canonical_bytes(), bytes);
  EXPECT_EQ(IdentityCert::from_json(a.cert.to_json()), a.cert);
}

TEST_F(IdentityTest, FileRoundTrip) {
  auto dir = std::filesystem::temp_directory_path() / "collab-identity-test";
  std::filesystem::remove_all(dir);
  auto a = new_identity("alice", rng, kNow);
  save_identity(a, dir / "id.json");
  auto b = load_identity(dir / "id.json");
  EXPECT_EQ(b.cert, a.cert);
  EXPECT_EQ(b.secret.raw(), a.secret.raw());
  std::filesystem::remove_all(dir);
}

TEST_F(IdentityTest, ExpiredRejected) {
  auto a = new_identity("alice", rng, kNow, 1000);
  TrustStore store(TrustMode::incremental);
  auto r = store.verify_cert(a.cert, kNow + 5000);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.code(), Errc::expired);
  EXPECT_TRUE(store.pins().empty());
}

TEST_F(IdentityTest, TrustOnFirstUsePinsThenRejectsKeyChange) {
  TrustStore store(TrustMode::incremental);
  auto a1 = new_identity("alice", rng, kNow);
  auto r = store.verify_cert(a1.cert, kNow);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(store.pins().count("alice"), 1u);
  EXPECT_EQ(store.pins().at("alice").fingerprint, a1.fingerprint());

  auto a2 = new_identity("alice", rng, kNow);
  auto r2 = store.verify_cert(a2.cert, kNow);
  ASSERT_FALSE(r2.ok());
  EXPECT_EQ(r2.code(), Errc::pin_mismatch);
  EXPECT_EQ(store.pins().at("alice").fingerprint, a1.fingerprint());

  // The same key cannot be re-presented under another name either.
  auto renamed = a1.cert;
  renamed.subject = "mallory";
  renamed.issuer = "mallory";
  renamed.signature = a1.sign(renamed.tbs_bytes());
  EXPECT_EQ(store.verify_cert(renamed, kNow).code(), Errc::pin_mismatch);

  EXPECT_TRUE(store.verify_cert(a1.cert, kNow + 10).ok());
}

TEST_F(IdentityTest, PinsSurviveSerialization) {
  TrustStore store(TrustMode::incremental);
  auto a = new_identity("alice", rng, kNow);
  ASSERT_TRUE(store.verify_cert(a.cert, kNow).ok());
  TrustStore restored(TrustMode::incremental);
  restored.load_pins(store.pins_to_json());
  auto other = new_identity("alice", rng, kNow);
  EXPECT_EQ(restored.verify_cert(other.cert, kNow).code(), Errc::pin_mismatch);
  EXPECT_TRUE(restored.verify_cert(a.cert, kNow).ok());
}

TEST_F(IdentityTest, RegisteredModeRequiresRoot) {
  auto ca = new_identity("ca", rng, kNow);
  auto bob = new_identity_issued_by(ca, "bob", rng, kNow);
  auto stranger = new_identity("eve", rng, kNow);
  TrustStore store(TrustMode::registered);
  EXPECT_EQ(store.verify_cert(bob.cert, kNow).code(), Errc::untrusted);
  store.add_root(ca.cert);
  EXPECT_EQ(*store.verify_cert(bob.cert, kNow), "bob");
  EXPECT_EQ(store.verify_cert(stranger.cert, kNow).code(), Errc::untrusted);

  auto forged = new_identity_issued_by(stranger, "bob", rng, kNow).cert;
  forged.issuer = "ca";
  EXPECT_EQ(store.verify_cert(forged, kNow).code(), Errc::bad_signature);
}

TEST_F(IdentityTest, AnyByteFlipInCertIsRejected) {
  auto a = new_identity("alice", rng, kNow);
  auto canonical = a.cert.canonical_bytes();
  for (std::size_t i = 0; i < canonical.size(); ++i) {
    auto mutated = canonical;
    mutated[i] ^= 0x01;
    IdentityCert c;
    try {
      c = IdentityCert::decode(mutated);
    } catch (const Error&) {
      continue;  // structurally broken is also a rejection
    }
    TrustStore store(TrustMode::incremental);
    store.add_root(a.cert);
    auto r = store.verify_cert(c, kNow + 1);
    // A flip can only "succeed" by yielding a different, still valid self-signed
    // cert; with Ed25519 that would be a forgery.
    EXPECT_FALSE(r.ok()) << "byte " << i;
  }
}

// ---- authorization ------------------------------------------------------

namespace {

PolicyDocument make_policy(const Identity& owner, std::string pattern, std::vector<std::string> subjects,
                           std::vector<std::string> attrs) {
  PolicyDocument p;
  p.resource_pattern = std::move(pattern);
  p.allow_subjects = std::move(subjects);
  p.require_attributes = std::move(attrs);
  p.sign(owner);
  return p;
}

}  // namespace

TEST_F(IdentityTest, DefaultDeny) {
  PolicyEngine engine;
  auto d = engine.authorize("shared/x", "alice");
  EXPECT_FALSE(d.allow);
  EXPECT_EQ(d.reason, "no-policy");
}

TEST_F(IdentityTest, GlobAllowListed) {
  auto owner = new_identity("owner", rng, kNow);
  PolicyEngine engine;
  engine.add_stakeholder(owner.cert);
  engine.add_policy(make_policy(owner, "shared/*", {"alice"}, {}));
  auto d = engine.authorize("shared/run42.root", "alice");
  EXPECT_TRUE(d.allow);
  EXPECT_EQ(d.reason, "rule:0");
  EXPECT_EQ(engine.authorize("private/run42.root", "alice").reason, "no-policy");
  EXPECT_EQ(engine.authorize("shared/run42.root", "bob").reason, "attribute-missing");
}

TEST_F(IdentityTest, AttributeMissing) {
  auto owner = new_identity("owner", rng, kNow);
  PolicyEngine engine;
  engine.add_stakeholder(owner.cert);
  engine.add_policy(make_policy(owner, "*", {}, {"cms-member"}));
  AttributeAssertion a{"carol", {"atlas-member"}, "", {}};
  a.sign(owner);
  engine.add_assertion(a);
  auto d = engine.authorize("data/x", "carol");
  EXPECT_FALSE(d.allow);
  EXPECT_EQ(d.reason, "attribute-missing");

  AttributeAssertion b{"carol", {"cms-member"}, "", {}};
  b.sign(owner);
  engine.add_assertion(b);
  EXPECT_TRUE(engine.authorize("data/x", "carol").allow);
}

TEST_F(IdentityTest, UnsignedAssertionIgnored) {
  auto owner = new_identity("owner", rng, kNow);
  auto mallory = new_identity("mallory", rng, kNow);
  PolicyEngine engine;
  engine.add_stakeholder(owner.cert);
  AttributeAssertion a{"mallory", {"cms-member"}, "", {}};
  a.sign(mallory);
  a.stakeholder = "owner";
  engine.add_assertion(a);
  EXPECT_TRUE(engine.attributes_of("mallory").empty());
}

TEST_F(IdentityTest, UnverifiablePolicySkipped) {
  auto owner = new_identity("owner", rng, kNow);
  PolicyEngine engine;
  engine.add_stakeholder(owner.cert);
  auto p = make_policy(owner, "shared/*", {"alice"}, {});
  p.allow_subjects.push_back("mallory");  // tampered after signing
  engine.add_policy(p);
  auto d = engine.authorize("shared/a", "mallory");
  EXPECT_FALSE(d.allow);
  EXPECT_EQ(d.reason, "bad-signature");
  EXPECT_EQ(d.skipped, std::vector<std::size_t>{0});
}

TEST_F(IdentityTest, AnyByteFlipInPolicyIsRejected) {
  auto owner = new_identity("owner", rng, kNow);
  auto p = make_policy(owner, "shared/*", {"alice"}, {"x"});
  ASSERT_TRUE(p.verify(owner.cert.public_key));
  for (std::size_t i = 0; i < p.signature.size(); ++i) {
    auto q = p;
    q.signature[i] ^= 0x80;
    EXPECT_FALSE(q.verify(owner.cert.public_key));
  }
  auto tbs = p.tbs_bytes();
  for (std::size_t i = 0; i < tbs.size(); ++i) {
    auto m = tbs;
    m[i] ^= 0x01;
    EXPECT_FALSE(crypto::verify(owner.cert.public_key, m, p.signature));
  }
}

TEST_F(IdentityTest, PolicyJsonRoundTrip) {
  auto owner = new_identity("owner", rng, kNow);
  auto p = make_policy(owner, "a/*", {"x", "y"}, {"z"});
  auto q = PolicyDocument::from_json(p.to_json());
  EXPECT_EQ(q.tbs_bytes(), p.tbs_bytes());
  EXPECT_TRUE(q.verify(owner.cert.public_key));
}

// Independent oracle: evaluate the rule literally over explicit sets.
namespace {

struct OraclePolicy {
  bool matches;
  bool lists_subject;
  unsigned attrs;  // bitmask over {a, b, c}
  bool verified;
};

AuthzDecision oracle(const std::vector<OraclePolicy>& ps, unsigned held) {
  AuthzDecision d;
  bool any_verified_match = false;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[i];
    if (!p.matches) continue;
    if (!p.verified) {
      d.skipped.push_back(i);
      continue;
    }
    any_verified_match = true;
    bool grant = p.lists_subject || (p.attrs != 0 && (p.attrs & ~held) == 0);
    if (grant) {
      d.allow = true;
      d.reason = "rule:" + std::to_string(i);
      return d;
    }
  }
  d.reason = any_verified_match ? "attribute-missing" : (d.skipped.empty() ? "no-policy" : "bad-signature");
  return d;
}

}  // namespace

TEST(AuthorizeOracle, ExhaustiveTruthTable) {
  const std::array<std::string, 3> names{"a", "b", "c"};
  auto to_names = [&](unsigned mask) {
    std::vector<std::string> out;
    for (unsigned i = 0; i < 3; ++i)
      if (mask & (1u << i)) out.push_back(names[i]);
    return out;
  };
  // per-policy shape: matches(2) x lists(2) x attrs(8) x verified(2) = 64
  std::size_t checked = 0;
  for (std::size_t n = 0; n <= 3; ++n) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 64;
    for (std::size_t c = 0; c < combos; ++c) {
      std::vector<OraclePolicy> ops;
      std::vector<PolicyEntry> entries;
      std::size_t code = c;
      for (std::size_t i = 0; i < n; ++i) {
        unsigned k = code % 64;
        code /= 64;
        OraclePolicy op{(k & 1) != 0, (k & 2) != 0, (k >> 2) & 7u, (k & 32) != 0};
        ops.push_back(op);
        PolicyEntry e;
        e.doc.resource_pattern = op.matches ? "res/*" : "other/*";
        if (op.lists_subject) e.doc.allow_subjects = {"alice"};
        e.doc.require_attributes = to_names(op.attrs);
        e.verified = op.verified;
        entries.push_back(std::move(e));
      }
      for (unsigned held = 0; held < 8; ++held) {
        auto names_held = to_names(held);
        std::set<std::string> assertions(names_held.begin(), names_held.end());
        auto got = authorize("res/item", "alice", assertions, entries);
        ASSERT_EQ(got, oracle(ops, held)) << "n=" << n << " combo=" << c << " held=" << held;
        // Monotonicity: adding any attribute never turns allow into deny.
        if (got.allow) {
          for (unsigned extra = 0; extra < 3; ++extra) {
            auto more = assertions;
            more.insert(names[extra]);
            ASSERT_TRUE(authorize("res/item", "alice", more, entries).allow);
          }
        }
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 8u * (1 + 64 + 64 * 64 + 64 * 64 * 64));
}

TEST(AuthorizeOracle, GlobCrossesSlash) {
  EXPECT_TRUE(glob_match("shared/*", "shared/a/b"));
  EXPECT_TRUE(glob_match("*.root", "x/y.root"));
  EXPECT_FALSE(glob_match("shared/*", "sharedx"));
}
