// simlab run <scenario.json>: replays a scenario deterministically and prints
// its trace digest.
#include <filesystem>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "collab/common/error.hpp"
#include "collab/peerd/sim_run.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"simlab: deterministic network scenarios"};
  app.require_subcommand(1);
  auto* run = app.add_subcommand("run", "run a scenario file");
  std::string path;
  std::string workdir;
  bool summary = false;
  std::optional<std::uint64_t> seed;
  run->add_option("scenario", path, "scenario JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--workdir", workdir, "scratch directory (default: fresh temp dir, removed afterwards)");
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_flag("--summary", summary, "also print the workload summary as JSON");
  CLI11_PARSE(app, argc, argv);

  try {
    auto sc = collab::netsim::Scenario::load(path);
    if (seed) sc.seed = *seed;
    bool temp = workdir.empty();
    fs::path dir = temp ? fs::temp_directory_path() / ("simlab-" + std::to_string(std::random_device{}())) : fs::path(workdir);
    fs::create_directories(dir);
    auto result = collab::peerd::run_scenario(sc, dir);
    if (temp) fs::remove_all(dir);
    std::cout << result.digest.to_string() << "\n";
    if (summary) std::cout << result.summary.dump(2) << "\n";
  } catch (const collab::Error& e) {
    std::cerr << "simlab: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "simlab: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
