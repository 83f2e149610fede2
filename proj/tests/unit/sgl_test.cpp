#include <gtest/gtest.h>

#include <random>
#include <set>

#include "collab/sgl/algebra.hpp"
#include "collab/sgl/channel.hpp"
#include "collab/sgl/gdh.hpp"
#include "collab/sgl/keys.hpp"
#include "support/scenarios.hpp"

using namespace collab;
using namespace collab::sgl;

namespace {

std::vector<Bytes> run_agreement(std::shared_ptr<const GroupAlgebra> alg, std::vector<Scalar> xs,
                                 std::uint64_t epoch = 1) {
  return collab::testing::run_gdh(std::move(alg), xs, epoch);
}

std::shared_ptr<const KeyMaterial> keys_for(std::uint64_t epoch, std::uint8_t seed = 1) {
  Bytes shared(32, seed);
  return std::make_shared<const KeyMaterial>(derive_keys(shared, "venue/x", epoch));
}

}  // namespace

TEST(Algebra, ToyGroupBasics) {
  ModPGroup g(23, 5, 22);
  EXPECT_EQ(g.element_size(), 1u);
  EXPECT_EQ(g.decode(g.generator()), 5u);
  EXPECT_EQ(ModPGroup::pow_mod(5, 24, 23), 2u);
  EXPECT_THROW(ModPGroup(23, 5, 11), Error);  // 5 has order 22, not 11
  crypto::SeededRandom rng(1, "scalars");
  for (int i = 0; i < 500; ++i) {
    auto v = ModPGroup::scalar_value(g.random_scalar(rng));
    EXPECT_GE(v, 1u);
    EXPECT_LE(v, 21u);
  }
}

TEST(Algebra, ExponentsCommute) {
  crypto::SeededRandom rng(2, "commute");
  for (auto alg : {toy_group(), production_group()}) {
    for (int i = 0; i < 20; ++i) {
      auto a = alg->random_scalar(rng);
      auto b = alg->random_scalar(rng);
      auto g = alg->generator();
      EXPECT_EQ(alg->exp(alg->exp(g, a), b), alg->exp(alg->exp(g, b), a)) << alg->name();
    }
  }
}

TEST(Gdh, SingletonUsesOwnPartial) {
  auto alg = toy_group();
  GdhSession s(alg, "g", 1, 1, 0, ModPGroup::scalar(3));
  EXPECT_FALSE(s.start().has_value());
  ASSERT_TRUE(s.done());
  EXPECT_EQ(s.shared_element(), Bytes{10});  // 5^3 mod 23 = 125 mod 23 = 10
  EXPECT_EQ(s.keys(), derive_keys(Bytes{10}, "g", 1));
}

TEST(Gdh, ToyThreeMemberExample) {
  auto shared = run_agreement(toy_group(), {ModPGroup::scalar(3), ModPGroup::scalar(4), ModPGroup::scalar(2)});
  // 5^(3*4*2) mod 23 = 2
  for (const auto& s : shared) EXPECT_EQ(s, Bytes{2});
}

TEST(Gdh, DirectExponentiationOracle) {
  auto r = collab::testing::key_agreement_oracle_run(3, 100);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(Gdh, ProductionGroupAgrees) {
  crypto::SeededRandom rng(4, "ristretto");
  auto alg = production_group();
  for (std::size_t n = 1; n <= 5; ++n) {
    std::vector<Scalar> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(alg->random_scalar(rng));
    auto shared = run_agreement(alg, xs);
    for (const auto& s : shared) EXPECT_EQ(s, shared[0]);
  }
}

TEST(Gdh, MissingPartialAborts) {
  auto alg = toy_group();
  std::vector<GdhSession> m;
  for (std::size_t i = 0; i < 3; ++i) m.emplace_back(alg, "g", 1, 3, i, ModPGroup::scalar(3 + i));
  auto up1 = m[0].start();
  auto up2 = *m[1].on_flow(*up1);
  auto down = *m[2].on_flow(*up2);
  ASSERT_TRUE(down.has_value());
  down->elements.pop_back();  // member 2's partial dropped
  auto shortened = *down;
  shortened.elements.resize(1);
  auto r = m[1].on_flow(shortened);
  ASSERT_FALSE(r.ok());
  EXPECT_EQ(r.code(), Errc::missing_partial);
  EXPECT_EQ(m[1].phase(), GdhPhase::failed);
  EXPECT_TRUE(m[0].on_flow(shortened).code() == Errc::missing_partial);
}

TEST(Gdh, WrongEpochOrSenderRejected) {
  auto alg = toy_group();
  GdhSession a(alg, "g", 1, 3, 0, ModPGroup::scalar(3));
  GdhSession c(alg, "g", 1, 3, 2, ModPGroup::scalar(5));
  auto up = a.start();
  EXPECT_EQ(c.on_flow(*up).code(), Errc::precondition);  // not from predecessor
  auto stale = *up;
  stale.epoch = 0;
  GdhSession b(alg, "g", 1, 3, 1, ModPGroup::scalar(4));
  EXPECT_EQ(b.on_flow(stale).code(), Errc::stale_epoch);
  EXPECT_TRUE(b.on_flow(*up).ok());
}

TEST(Gdh, FlowSignatureAndWire) {
  crypto::SeededRandom rng(5, "flow");
  auto seed = rng.array<32>();
  auto kp = crypto::signing_keypair_from_seed(seed);
  KeyFlow f;
  f.kind = FlowKind::downflow;
  f.group = "venue/ab";
  f.epoch = 7;
  f.sender = 2;
  f.elements = {Bytes{1}, Bytes{2}, Bytes{3}};
  f.sign(kp.secret_key);
  auto back = KeyFlow::decode(f.encode());
  EXPECT_TRUE(back.verify(kp.public_key));
  EXPECT_EQ(back.elements, f.elements);
  back.elements[1][0] ^= 1;
  EXPECT_FALSE(back.verify(kp.public_key));
}

TEST(Keys, HkdfRfc5869Case1) {
  Bytes ikm(22, 0x0b);
  auto salt = from_hex("000102030405060708090a0b0c");
  auto info = from_hex("f0f1f2f3f4f5f6f7f8f9");
  auto prk = hkdf_extract(salt, ikm);
  EXPECT_EQ(to_hex(prk), "077709362c2e32df0ddc3f0dc47bba6390b6c73bb50f9c3122ec844ad7c2b3e5");
  EXPECT_EQ(to_hex(hkdf_expand(prk, info, 42)),
            "3cb25f25faacd57a90434f64d0362f2a2d2d0a90cf1a5a4c5db02d56ecc4c5bf34007208d5b887185865");
}

TEST(Keys, DeterministicAndSeparated) {
  Bytes s{2};
  auto a = derive_keys(s, "g", 5);
  EXPECT_EQ(a, derive_keys(s, "g", 5));
  auto b = derive_keys(s, "g", 6);
  EXPECT_NE(a.enc_key, b.enc_key);
  EXPECT_NE(a.mac_key, b.mac_key);
  EXPECT_NE(a.enc_key, a.mac_key);
  EXPECT_NE(a.enc_key, derive_keys(s, "h", 5).enc_key);
}

TEST(Channel, RoundTripAllSizes) {
  auto k = keys_for(1);
  Sealer sealer(k, 3);
  Opener opener(k);
  std::mt19937 gen(9);
  std::vector<std::size_t> sizes{0, 1, 15, 16, 17, 255, 1024, 7168, 65535, 65536};
  for (int i = 0; i < 40; ++i) sizes.push_back(gen() % 65537);
  for (auto n : sizes) {
    Bytes pt(n);
    for (auto& b : pt) b = static_cast<std::uint8_t>(gen());
    auto sealed = sealer.seal(pt, as_bytes("hdr"));
    ASSERT_TRUE(sealed.ok());
    auto wire = sealed->encode();
    auto got = opener.open(SealedMessage::decode(wire), as_bytes("hdr"));
    ASSERT_TRUE(got.ok()) << n;
    EXPECT_EQ(*got, pt);
  }
}

TEST(Channel, SameMessageDifferentCiphertexts) {
  auto k = keys_for(1);
  Sealer s(k, 0);
  auto a = *s.seal(as_bytes("hello"), {});
  auto b = *s.seal(as_bytes("hello"), {});
  EXPECT_NE(a.nonce, b.nonce);
  EXPECT_NE(a.ciphertext, b.ciphertext);
  EXPECT_EQ(a.sender_index(), 0u);
  EXPECT_EQ(b.counter(), 1u);
}

TEST(Channel, EmptyPlaintext) {
  auto k = keys_for(1);
  Sealer s(k, 1);
  Opener o(k);
  auto m = *s.seal({}, {});
  EXPECT_TRUE(m.ciphertext.empty());
  auto r = o.open(m, {});
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(r->empty());
}

TEST(Channel, EveryBitFlipFailsAuthentication) {
  auto k = keys_for(1);
  Sealer s(k, 1);
  auto m = *s.seal(as_bytes("integrity matters"), as_bytes("aad"));
  std::uint64_t failures = 0;
  for (std::size_t i = 0; i < m.ciphertext.size() * 8; ++i) {
    Opener o(k);
    auto t = m;
    t.ciphertext[i / 8] ^= static_cast<std::uint8_t>(1u << (i % 8));
    EXPECT_EQ(o.open(t, as_bytes("aad")).code(), Errc::auth_fail);
    failures += o.auth_failures();
  }
  EXPECT_EQ(failures, m.ciphertext.size() * 8);
  Opener o(k);
  auto t = m;
  t.tag[0] ^= 1;
  EXPECT_EQ(o.open(t, as_bytes("aad")).code(), Errc::auth_fail);
  EXPECT_EQ(o.open(m, as_bytes("aaD")).code(), Errc::auth_fail);
  // A failed attempt must not burn the nonce.
  EXPECT_TRUE(o.open(m, as_bytes("aad")).ok());
}

TEST(Channel, StaleEpoch) {
  auto old_keys = keys_for(1);
  auto new_keys = keys_for(2);
  Sealer s(new_keys, 0);
  Opener o(old_keys);
  for (int i = 0; i < 10; ++i) {
    auto m = *s.seal(as_bytes("new view traffic"), {});
    EXPECT_EQ(o.open(m, {}).code(), Errc::stale_epoch);
    // Even relabelled with the old epoch it cannot authenticate.
    m.epoch = 1;
    EXPECT_EQ(o.open(m, {}).code(), Errc::auth_fail);
  }
}

TEST(Channel, ReplayHarnessAcceptsNoDuplicates) {
  auto k = keys_for(1);
  std::vector<SealedMessage> frames;
  for (std::uint32_t sender = 0; sender < 4; ++sender) {
    Sealer s(k, sender);
    for (int i = 0; i < 300; ++i) frames.push_back(*s.seal(as_bytes("m" + std::to_string(i)), {}));
  }
  // Inject duplicates and shuffle locally (bounded displacement) as a lossy
  // network would.
  std::mt19937 gen(11);
  std::vector<SealedMessage> stream;
  for (const auto& f : frames) {
    stream.push_back(f);
    if (gen() % 3 == 0) stream.push_back(f);
  }
  for (std::size_t i = 0; i + 1 < stream.size(); ++i) {
    if (gen() % 4 == 0) std::swap(stream[i], stream[i + 1 + gen() % std::min<std::size_t>(8, stream.size() - i - 1)]);
  }
  Opener o(k);
  std::set<std::pair<std::uint32_t, std::uint64_t>> accepted;
  std::size_t dup_accepted = 0;
  for (const auto& f : stream) {
    auto r = o.open(f, {});
    if (r.ok() && !accepted.insert({f.sender_index(), f.counter()}).second) ++dup_accepted;
  }
  EXPECT_EQ(dup_accepted, 0u);
  EXPECT_EQ(accepted.size(), frames.size());
  EXPECT_EQ(o.replays(), stream.size() - frames.size());
}

TEST(Channel, ReplayWindowEdges) {
  ReplayWindow w;
  EXPECT_TRUE(w.acceptable(5));
  w.mark(5);
  EXPECT_FALSE(w.acceptable(5));
  EXPECT_TRUE(w.acceptable(4));
  w.mark(5 + ReplayWindow::kSize);
  EXPECT_FALSE(w.acceptable(5));  // slid out
  EXPECT_FALSE(w.acceptable(4));
  EXPECT_TRUE(w.acceptable(6 + 1));
  w.mark(7);
  EXPECT_FALSE(w.acceptable(7));
}

TEST(Channel, CounterExhaustion) {
  auto k = keys_for(1);
  Sealer s(k, 0, 3);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(s.seal({}, {}).ok());
  EXPECT_TRUE(s.exhausted());
  EXPECT_EQ(s.seal({}, {}).code(), Errc::counter_exhausted);
}

TEST(Channel, OutsiderForgeriesRejected) {
  crypto::SeededRandom secret_rng(17, "member-secret");
  auto k = std::make_shared<const KeyMaterial>(derive_keys(secret_rng.array<32>(), "venue/x", 1));
  Sealer member(k, 0);
  std::vector<SealedMessage> observed;
  for (int i = 0; i < 20; ++i) observed.push_back(*member.seal(as_bytes("secret " + std::to_string(i)), {}));
  Opener o(k);
  std::mt19937_64 gen(13);
  std::size_t accepted = 0;
  for (int i = 0; i < 2000; ++i) {
    SealedMessage f = observed[gen() % observed.size()];
    switch (i % 4) {
      case 0:  // fresh nonce, recycled body
        f.nonce = make_nonce(static_cast<std::uint32_t>(gen() % 4), 1000 + gen() % 100000);
        break;
      case 1:  // random ciphertext and tag
        for (auto& b : f.ciphertext) b = static_cast<std::uint8_t>(gen());
        for (auto& b : f.tag) b = static_cast<std::uint8_t>(gen());
        f.nonce = make_nonce(1, i);
        break;
      case 2: {  // sealed under a guessed key
        auto guess = std::make_shared<const KeyMaterial>(derive_keys(Bytes(32, static_cast<std::uint8_t>(gen())), "venue/x", 1));
        Sealer s(guess, 2);
        for (int j = 0; j < i; j += 97) s.seal({}, {});
        f = *s.seal(as_bytes("forged"), {});
        break;
      }
      default:  // splice ciphertext of one frame with another's tag
        f.tag = observed[(gen() % observed.size())].tag;
        f.nonce = make_nonce(3, i);
        break;
    }
    if (o.open(f, {}).ok()) ++accepted;
  }
  EXPECT_EQ(accepted, 0u);
}
