// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Each criterion also has a wall-time budget.
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "collab/peerd/sim_run.hpp"
#include "support/peers.hpp"
#include "support/scenarios.hpp"

using namespace collab;
using collab::testing::Outcome;

namespace {

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

Outcome failed_with(const std::string& why) { return {false, why}; }

// Runs body over each item, stopping at the first failure.
Outcome all_of(int count, const std::function<Outcome(int)>& body, const std::string& what) {
  for (int i = 0; i < count; ++i) {
    auto o = body(i);
    if (!o.ok) return failed_with(what + " " + std::to_string(i) + ": " + o.detail);
  }
  return {true, std::to_string(count) + " " + what + "s"};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(COLLAB_SCENARIO_DIR)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) return failed_with("no scenario files in " COLLAB_SCENARIO_DIR);
  int runs = 0;
  for (const auto& f : files) {
    auto sc = netsim::Scenario::load(f);
    for (auto seed : {sc.seed, sc.seed + 1000}) {
      sc.seed = seed;
      collab::testing::TempDir a("determinism-a"), b("determinism-b");
      auto first = peerd::run_scenario(sc, a.path());
      auto second = peerd::run_scenario(sc, b.path());
      ++runs;
      if (first.digest != second.digest) {
        return failed_with(f.filename().string() + " seed " + std::to_string(seed) + ": " + first.digest.to_string() +
                             " vs " + second.digest.to_string());
      }
    }
  }
  return {true, std::to_string(files.size()) + " scenario files x 2 seeds replayed, " + std::to_string(runs) + " digest pairs equal"};
}

}  // namespace

int main() {
  using namespace collab::testing;
  std::vector<Criterion> criteria{
      {"total-order agreement", 30, [] { return all_of(50, [](int s) { return total_order_run(1 + s); }, "seed"); }},
      {"virtual synchrony", 20, [] { return all_of(20, [](int s) { return virtual_synchrony_run(1 + s); }, "seed"); }},
      {"key agreement oracle", 5, [] { return key_agreement_oracle_run(1, 100); }},
      {"rekey exclusion", 5, [] { return rekey_exclusion_run(1); }},
      {"forgery resistance", 10, [] { return forgery_run(1, 10'000); }},
      {"search soundness/completeness", 10, [] { return search_oracle_run(1, 200, 50); }},
      {"transfer integrity & resume", 10,
       [] {
         auto resume = transfer_resume_run(1);
         if (!resume.ok) return resume;
         auto corrupt = corrupted_source_run(1);
         if (!corrupt.ok) return corrupt;
         return Outcome{true, resume.detail + "; " + corrupt.detail};
       }},
      {"note exactly-once", 15,
       [] {
         return all_of(80, [](int k) { return note_schedule_run(1 + k / 8, k % 8); }, "seed/schedule");
       }},
      {"serverless operation", 5, [] { return serverless_run(1); }},
      {"determinism", 60, determinism},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = failed_with(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool ok = o.ok && secs < c.budget_s;
    failed += ok ? 0 : 1;
    std::ostringstream line;
    line.precision(2);
    line << std::fixed << (ok ? "PASS " : "FAIL ") << c.name << " (" << secs << " s, budget " << c.budget_s << " s): " << o.detail;
    if (o.ok && !ok) line << " [over time budget]";
    std::cout << line.str() << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
