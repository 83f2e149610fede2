#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "collab/membership/view.hpp"

namespace collab::ordcast {

// What one acker reports about the view it is leaving.
struct FlushReport {
  membership::ProcessId reporter;
  std::optional<membership::View> old_view;  // none for a fresh joiner
  std::vector<std::uint64_t> contiguous;       // indexed like old_view->members
};

// The agreed cut for one old view: per sender the highest seq any surviving
// member of that view holds contiguously, and who holds it.
struct OldViewCut {
  membership::ViewId old_view;
  std::vector<std::uint64_t> cut;
  std::vector<membership::ProcessId> provider;

  bool operator==(const OldViewCut&) const = default;
};

// One cut per distinct old view among the reports. Reports whose vector does
// not match their view size are ignored.
std::vector<OldViewCut> compute_cuts(const std::vector<FlushReport>& reports);

}  // namespace collab::ordcast
