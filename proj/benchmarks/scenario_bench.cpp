#include <filesystem>

#include <benchmark/benchmark.h>

#include "collab/peerd/sim_run.hpp"

using namespace collab;
namespace fs = std::filesystem;

// Full peers over a lossy simulated network: simulated seconds per wall second.
static void BM_PeerScenario(benchmark::State& state) {
  auto sc = netsim::Scenario::from_json({{"seed", 1},
                                         {"policy", {{"loss_prob", 0.05}, {"delay_min_ms", 5}, {"delay_max_ms", 80}}},
                                         {"workload", {{"peers", state.range(0)}, {"duration_ms", 60000}}}});
  auto dir = fs::temp_directory_path() / "collab-bench-scenario";
  std::uint64_t events = 0;
  for (auto _ : state) {
    fs::remove_all(dir);
    auto r = peerd::run_scenario(sc, dir);
    events += r.digest.event_count;
  }
  fs::remove_all(dir);
  state.counters["events"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
  state.counters["sim_s_per_s"] = benchmark::Counter(60.0 * static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_PeerScenario)->Arg(3)->Arg(6)->Unit(benchmark::kMillisecond)->Iterations(2);
