#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace collab::peerd {

struct ControlEvent {
  std::uint64_t seq = 0;
  std::string kind;
  nlohmann::json payload;

  nlohmann::json to_json() const { return {{"seq", seq}, {"kind", kind}, {"payload", payload}}; }
};

// Sequence-numbered events for API consumers. Appended on the protocol
// thread, read from any thread; readers may block until something newer
// than their cursor exists.
class EventLog {
 public:
  explicit EventLog(std::size_t retain = 100'000) : retain_(retain) {}

  std::uint64_t append(std::string kind, nlohmann::json payload);
  // Events with seq > cursor, oldest first.
  std::vector<ControlEvent> since(std::uint64_t cursor, std::size_t max = 1000) const;
  std::uint64_t last_seq() const;
  // True once an event newer than cursor exists; false on timeout.
  bool wait(std::uint64_t cursor, std::chrono::milliseconds timeout) const;

 private:
  std::size_t retain_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::deque<ControlEvent> events_;
  std::uint64_t next_ = 1;
};

}  // namespace collab::peerd
