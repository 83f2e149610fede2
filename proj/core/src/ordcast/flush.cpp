#include "collab/ordcast/flush.hpp"

namespace collab::ordcast {

std::vector<OldViewCut> compute_cuts(const std::vector<FlushReport>& reports) {
  std::map<membership::ViewId, OldViewCut> by_view;
  for (const auto& r : reports) {
    if (!r.old_view || r.contiguous.size() != r.old_view->members.size()) continue;
    auto [it, fresh] = by_view.try_emplace(r.old_view->id);
    auto& c = it->second;
    if (fresh) {
      c.old_view = r.old_view->id;
      c.cut.assign(r.contiguous.size(), 0);
      c.provider.assign(r.contiguous.size(), r.reporter);
    }
    if (c.cut.size() != r.contiguous.size()) continue;
    for (std::size_t s = 0; s < c.cut.size(); ++s) {
      // Ties go to the smallest reporter so every run picks the same provider.
      if (r.contiguous[s] > c.cut[s] || (r.contiguous[s] == c.cut[s] && r.reporter < c.provider[s])) {
        c.cut[s] = r.contiguous[s];
        c.provider[s] = r.reporter;
      }
    }
  }
  std::vector<OldViewCut> out;
  for (auto& [id, c] : by_view) out.push_back(std::move(c));
  return out;
}

}  // namespace collab::ordcast
