#include "collab/peerd/event_log.hpp"

#include <algorithm>

namespace collab::peerd {

std::uint64_t EventLog::append(std::string kind, nlohmann::json payload) {
  std::uint64_t seq = 0;
  {
    std::lock_guard lock(mu_);
    seq = next_++;
    events_.push_back({seq, std::move(kind), std::move(payload)});
    while (events_.size() > retain_) events_.pop_front();
  }
  cv_.notify_all();
  return seq;
}

std::vector<ControlEvent> EventLog::since(std::uint64_t cursor, std::size_t max) const {
  std::lock_guard lock(mu_);
  auto it = std::upper_bound(events_.begin(), events_.end(), cursor,
                             [](std::uint64_t c, const ControlEvent& e) { return c < e.seq; });
  std::vector<ControlEvent> out;
  for (; it != events_.end() && out.size() < max; ++it) out.push_back(*it);
  return out;
}

std::uint64_t EventLog::last_seq() const {
  std::lock_guard lock(mu_);
  return next_ - 1;
}

bool EventLog::wait(std::uint64_t cursor, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  return cv_.wait_for(lock, timeout, [&] { return next_ - 1 > cursor; });
}

}  // namespace collab::peerd
