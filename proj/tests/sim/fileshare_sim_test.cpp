#include <gtest/gtest.h>

#include <iostream>

#include "support/scenarios.hpp"

namespace collab::testing {
namespace {

TEST(FileShareSim, SearchMatchesBruteForceOracle) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto r = search_oracle_run(seed);
    EXPECT_TRUE(r.ok) << "seed " << seed << ": " << r.detail;
    std::cout << "seed " << seed << ": " << r.detail << "\n";
  }
}

TEST(FileShareSim, SearchWithHitsOverGroup) {
  auto r = search_oracle_run(7, 80, 20, true);
  EXPECT_TRUE(r.ok) << r.detail;
}

TEST(FileShareSim, TransferResumesAfterKill) {
  auto r = transfer_resume_run(11);
  EXPECT_TRUE(r.ok) << r.detail;
  std::cout << r.detail << "\n";
}

TEST(FileShareSim, CorruptedSourceNeverDone) {
  auto r = corrupted_source_run(12);
  EXPECT_TRUE(r.ok) << r.detail;
}

}  // namespace
}  // namespace collab::testing
