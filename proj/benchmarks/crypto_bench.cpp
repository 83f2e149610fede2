#include <benchmark/benchmark.h>

#include "collab/crypto/crypto.hpp"
#include "collab/sgl/algebra.hpp"
#include "collab/sgl/channel.hpp"
#include "collab/sgl/keys.hpp"

using namespace collab;

namespace {

std::shared_ptr<const sgl::KeyMaterial> keys() {
  Bytes shared(32, 7);
  return std::make_shared<sgl::KeyMaterial>(sgl::derive_keys(shared, "bench", 1));
}

}  // namespace

static void BM_Seal(benchmark::State& state) {
  sgl::Sealer sealer(keys(), 0);
  Bytes msg(state.range(0), 1);
  Bytes aad(24, 2);
  for (auto _ : state) benchmark::DoNotOptimize(sealer.seal(msg, aad));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Seal)->Arg(64)->Arg(1024)->Arg(8000);

static void BM_SealOpen(benchmark::State& state) {
  auto k = keys();
  sgl::Sealer sealer(k, 0);
  sgl::Opener opener(k);
  Bytes msg(state.range(0), 1);
  Bytes aad(24, 2);
  for (auto _ : state) {
    auto s = sealer.seal(msg, aad);
    benchmark::DoNotOptimize(opener.open(*s, aad));
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SealOpen)->Arg(64)->Arg(1024)->Arg(8000);

// One exponentiation: the unit cost of every key agreement step.
static void BM_GroupExp(benchmark::State& state) {
  auto alg = sgl::production_group();
  crypto::SeededRandom rng(1, "bench");
  auto x = alg->random_scalar(rng);
  auto g = alg->generator();
  for (auto _ : state) benchmark::DoNotOptimize(alg->exp(g, x));
}
BENCHMARK(BM_GroupExp);

static void BM_DeriveKeys(benchmark::State& state) {
  Bytes shared(32, 3);
  std::uint64_t epoch = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sgl::derive_keys(shared, "bench", ++epoch));
}
BENCHMARK(BM_DeriveKeys);
