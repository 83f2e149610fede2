#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "collab/common/event_sink.hpp"
#include "collab/fileshare/http.hpp"
#include "collab/fileshare/index.hpp"
#include "collab/group/node.hpp"
#include "collab/identity/policy.hpp"

namespace collab::fileshare {

using QueryId = std::array<std::uint8_t, 16>;

struct Locator {
  netsim::EndpointAddr addr;
  identity::Fingerprint responder{};
  EntryId entry_id{};

  nlohmann::json to_json() const;
  static Locator from_json(const nlohmann::json& doc);
};

struct HitEntry {
  EntryId entry_id{};
  std::string name;
  std::uint64_t size = 0;
  std::set<std::string> tags;
  Locator locator;

  nlohmann::json to_json() const;
  static HitEntry from_json(const nlohmann::json& doc);
};

struct QueryHit {
  QueryId query_id{};
  identity::Fingerprint responder{};
  std::vector<HitEntry> entries;

  nlohmann::json to_json() const;
  static QueryHit from_json(const nlohmann::json& doc);
};

enum class JobState { queued, connecting, transferring, verifying, done, failed };
const char* job_state_name(JobState s);

struct TransferJob {
  std::uint64_t id = 0;
  EntryId entry_id{};
  Locator source;
  std::string name;
  std::uint64_t size = 0;
  std::filesystem::path dest;
  JobState state = JobState::queued;
  std::string reason;  // FAILED(reason)
  std::uint64_t bytes_done = 0;
  std::uint64_t bytes_received = 0;  // across attempts, for accounting
  int attempts = 0;
  std::int64_t started = 0;
  std::int64_t finished = 0;

  bool terminal() const { return state == JobState::done || (state == JobState::failed && !retrying); }
  bool retrying = false;
  nlohmann::json to_json() const;
};

struct FileShareOptions {
  std::optional<std::filesystem::path> manifest;
  bool hits_via_group = false;
  std::uint64_t chunk_size = 64 * 1024;
  std::size_t parallel_chunks = 4;
  int retries = 3;
  netsim::SimTime retry_backoff_ms = 500;  // doubles per attempt
  netsim::SimTime stall_ms = 10'000;
  std::size_t max_jobs = 4;
  std::function<std::int64_t()> wall_clock;
};

// (resource, requester) -> decision. Resources are "file:<name>".
using Authorizer = std::function<identity::AuthzDecision(const std::string&, const identity::IdentityCert&)>;

class FileShare final : public netsim::StreamListener {
 public:
  static constexpr const char* kHitService = "fs-hit";
  static constexpr const char* kItemService = "fs-item";

  FileShare(group::Node& node, FileShareOptions options, Authorizer authorizer, EventSink events);
  ~FileShare() override;
  FileShare(const FileShare&) = delete;
  FileShare& operator=(const FileShare&) = delete;

  void attach_lobby(group::GroupSession* lobby) { lobby_ = lobby; }
  bool on_lobby_message(const group::GroupMessage& m, const nlohmann::json& body);

  Result<ShareEntry> add_share(const std::filesystem::path& path, const std::set<std::string>& tags);
  const ShareIndex& index() const { return index_; }
  ShareIndex& index() { return index_; }

  // NOT_MEMBER unless the lobby view is installed; INVALID_ARGUMENT for no terms.
  Result<QueryId> issue_query(const std::string& expr);
  const std::vector<QueryHit>* hits(const QueryId& q) const;
  std::vector<QueryId> queries() const;

  Result<std::uint64_t> fetch(const HitEntry& entry, const std::filesystem::path& dest);
  const TransferJob* job(std::uint64_t id) const;
  std::vector<TransferJob> jobs() const;
  // The fetch stream for a job, if a connection is live (tests kill it).
  std::optional<netsim::StreamId> job_stream(std::uint64_t id) const;

  struct Stats {
    std::uint64_t queries_sent = 0;
    std::uint64_t queries_handled = 0;
    std::uint64_t query_duplicates = 0;
    std::uint64_t hits_sent = 0;
    std::uint64_t hits_received = 0;
    std::uint64_t hits_rejected = 0;
    std::uint64_t chunks_served = 0;
    std::uint64_t requests_denied = 0;
    std::uint64_t requests_stale = 0;
  };
  const Stats& stats() const { return stats_; }
  // Body bytes written to fetch streams, per requester and entry.
  const std::map<std::pair<identity::Fingerprint, EntryId>, std::uint64_t>& served() const { return served_; }

  void on_stream_open(netsim::StreamId id, const netsim::EndpointAddr& peer, const std::string& service) override;
  void on_stream_message(netsim::StreamId id, Bytes message) override;
  void on_stream_closed(netsim::StreamId id, std::string_view reason) override;

 private:
  struct Query {
    std::vector<std::string> terms;
    std::vector<QueryHit> hits;
  };
  struct Attempt {
    netsim::StreamId stream = 0;
    std::deque<std::uint64_t> inflight;  // chunk indices, request order
    netsim::SimTime last_progress = 0;
  };
  struct Job {
    TransferJob pub;
    std::vector<bool> have;  // per chunk
    std::uint64_t next_chunk = 0;
    std::optional<Attempt> attempt;
    std::optional<netsim::TimerId> timer;
  };
  enum class StreamRole { hit_in, hit_out, item_in, item_out };

  netsim::Transport& net() { return node_.transport(); }
  std::int64_t wall() const;
  void emit(const std::string& kind, const nlohmann::json& payload);
  bool authorized(const ShareEntry& e, const identity::IdentityCert& who) const;
  std::optional<QueryHit> answer(const QueryId& q, const std::vector<std::string>& terms,
                                 const identity::IdentityCert& originator) const;
  void deliver_hit(QueryHit hit);

  void on_query(const group::GroupMessage& m, const nlohmann::json& body);
  void on_group_hit(const group::GroupMessage& m, const nlohmann::json& body);
  void on_hit_frame(ByteView frame);
  void serve(netsim::StreamId id, ByteView frame);
  ItemResponse serve_request(const ItemRequest& req, const identity::IdentityCert& who);

  std::uint64_t chunk_count(const Job& j) const;
  void schedule_jobs();
  void start_attempt(Job& j);
  void request_more(Job& j);
  void on_item_response(Job& j, ByteView frame);
  void fail(Job& j, const std::string& reason, bool retryable);
  void verify(Job& j);
  void finish_attempt(Job& j, bool close_stream);
  void arm_stall(Job& j);
  void publish(const Job& j);
  Job* job_by_stream(netsim::StreamId id);

  group::Node& node_;
  FileShareOptions opt_;
  Authorizer authorizer_;
  EventSink events_;
  ShareIndex index_;
  group::GroupSession* lobby_ = nullptr;
  std::map<QueryId, Query> queries_;
  std::set<std::pair<identity::Fingerprint, QueryId>> seen_queries_;
  std::map<std::uint64_t, Job> jobs_;
  std::uint64_t next_job_ = 1;
  std::map<netsim::StreamId, StreamRole> streams_;
  std::map<netsim::StreamId, std::uint64_t> stream_job_;
  Stats stats_;
  std::map<std::pair<identity::Fingerprint, EntryId>, std::uint64_t> served_;
};

}  // namespace collab::fileshare
