#include "collab/fileshare/fileshare.hpp"

#include <chrono>
#include <fstream>

namespace collab::fileshare {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Bytes dump(const json& j) {
  auto s = j.dump();
  return Bytes(s.begin(), s.end());
}

std::optional<json> parse(ByteView b) {
  auto j = json::parse(b.begin(), b.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

fs::path part_path(const fs::path& dest) {
  auto p = dest;
  p += ".part";
  return p;
}

constexpr std::uint64_t kMaxServe = 1 << 20;

}  // namespace

// ------------------------------------------------------------ wire types

json Locator::to_json() const {
  return json{{"addr", addr.to_string()}, {"responder", to_hex(responder)}, {"entry_id", to_hex(entry_id)}};
}

Locator Locator::from_json(const json& doc) {
  Locator l;
  l.addr = netsim::EndpointAddr::parse(doc.at("addr").get<std::string>());
  l.responder = array_from_hex<32>(doc.at("responder").get<std::string>());
  l.entry_id = array_from_hex<32>(doc.at("entry_id").get<std::string>());
  return l;
}

json HitEntry::to_json() const {
  return json{{"entry_id", to_hex(entry_id)}, {"name", name}, {"size", size}, {"tags", tags},
              {"locator", locator.to_json()}};
}

HitEntry HitEntry::from_json(const json& doc) {
  HitEntry e;
  e.entry_id = array_from_hex<32>(doc.at("entry_id").get<std::string>());
  e.name = doc.at("name").get<std::string>();
  e.size = doc.at("size").get<std::uint64_t>();
  e.tags = doc.value("tags", std::set<std::string>{});
  e.locator = Locator::from_json(doc.at("locator"));
  if (e.locator.entry_id != e.entry_id) throw Error(Errc::decode, "locator names another entry");
  return e;
}

json QueryHit::to_json() const {
  json entries_j = json::array();
  for (const auto& e : entries) entries_j.push_back(e.to_json());
  return json{{"query_id", to_hex(query_id)}, {"responder", to_hex(responder)}, {"entries", entries_j}};
}

QueryHit QueryHit::from_json(const json& doc) {
  try {
    QueryHit h;
    h.query_id = array_from_hex<16>(doc.at("query_id").get<std::string>());
    h.responder = array_from_hex<32>(doc.at("responder").get<std::string>());
    for (const auto& e : doc.at("entries")) h.entries.push_back(HitEntry::from_json(e));
    return h;
  } catch (const Error&) {
    throw;
  } catch (const std::exception& ex) {
    throw Error(Errc::decode, std::string("malformed hit: ") + ex.what());
  }
}

const char* job_state_name(JobState s) {
  switch (s) {
    case JobState::queued: return "QUEUED";
    case JobState::connecting: return "CONNECTING";
    case JobState::transferring: return "TRANSFERRING";
    case JobState::verifying: return "VERIFYING";
    case JobState::done: return "DONE";
    case JobState::failed: return "FAILED";
  }
  return "?";
}

json TransferJob::to_json() const {
  return json{{"id", id},
              {"entry_id", to_hex(entry_id)},
              {"name", name},
              {"size", size},
              {"dest", dest.string()},
              {"source", source.to_json()},
              {"state", job_state_name(state)},
              {"reason", reason},
              {"retrying", retrying},
              {"bytes_done", bytes_done},
              {"bytes_received", bytes_received},
              {"attempts", attempts},
              {"started", started},
              {"finished", finished}};
}

// ------------------------------------------------------------ lifecycle

FileShare::FileShare(group::Node& node, FileShareOptions options, Authorizer authorizer, EventSink events)
    : node_(node),
      opt_(std::move(options)),
      authorizer_(std::move(authorizer)),
      events_(std::move(events)),
      index_(opt_.manifest) {
  if (!authorizer_) throw Error(Errc::invalid_argument, "file sharing needs an authorizer");
  if (opt_.chunk_size == 0 || opt_.parallel_chunks == 0 || opt_.max_jobs == 0) {
    throw Error(Errc::invalid_argument, "chunk size, parallelism and job limit must be positive");
  }
  net().listen(kHitService, this);
  net().listen(kItemService, this);
}

FileShare::~FileShare() {
  net().listen(kHitService, nullptr);
  net().listen(kItemService, nullptr);
  for (auto& [id, j] : jobs_) {
    if (j.timer) net().cancel(*j.timer);
  }
  for (const auto& [id, role] : streams_) net().stream_close(id);
}

std::int64_t FileShare::wall() const {
  if (opt_.wall_clock) return opt_.wall_clock();
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

void FileShare::emit(const std::string& kind, const json& payload) {
  if (events_) events_(kind, payload);
}

Result<ShareEntry> FileShare::add_share(const fs::path& path, const std::set<std::string>& tags) {
  return index_.add_share(path, tags, wall());
}

bool FileShare::authorized(const ShareEntry& e, const identity::IdentityCert& who) const {
  return authorizer_("file:" + e.name, who).allow;
}

// ------------------------------------------------------------ queries

std::optional<QueryHit> FileShare::answer(const QueryId& q, const std::vector<std::string>& terms,
                                          const identity::IdentityCert& originator) const {
  QueryHit hit;
  hit.query_id = q;
  hit.responder = node_.identity().fingerprint();
  for (const auto& e : index_.match(terms)) {
    if (!authorized(e, originator)) continue;
    HitEntry h{e.entry_id, e.name, e.size, e.tags, {node_.transport().local_addr(), hit.responder, e.entry_id}};
    hit.entries.push_back(std::move(h));
  }
  if (hit.entries.empty()) return std::nullopt;
  return hit;
}

Result<QueryId> FileShare::issue_query(const std::string& expr) {
  auto terms = normalize_terms(expr);
  if (terms.empty()) return Error(Errc::invalid_argument, "query has no terms");
  if (lobby_ == nullptr || lobby_->state() != group::SessionState::member) {
    return Error(Errc::not_member, "not a member of the sharing group");
  }
  auto qid = node_.rng().array<16>();
  json msg{{"t", "query"}, {"query_id", to_hex(qid)}, {"terms", terms}, {"issued", wall()}};
  if (auto st = lobby_->multicast(dump(msg), ordcast::Mode::fifo); !st) return st.error();
  ++stats_.queries_sent;
  queries_[qid].terms = terms;
  emit("search", json{{"query_id", to_hex(qid)}, {"terms", terms}});
  if (auto self_hit = answer(qid, terms, node_.identity().cert)) deliver_hit(std::move(*self_hit));
  return qid;
}

const std::vector<QueryHit>* FileShare::hits(const QueryId& q) const {
  auto it = queries_.find(q);
  return it == queries_.end() ? nullptr : &it->second.hits;
}

std::vector<QueryId> FileShare::queries() const {
  std::vector<QueryId> out;
  for (const auto& [id, q] : queries_) out.push_back(id);
  return out;
}

bool FileShare::on_lobby_message(const group::GroupMessage& m, const json& body) {
  auto t = body.value("t", "");
  if (t == "query") {
    on_query(m, body);
    return true;
  }
  if (t == "hit") {
    on_group_hit(m, body);
    return true;
  }
  return false;
}

void FileShare::on_query(const group::GroupMessage& m, const json& body) {
  const auto& origin = m.sender.fingerprint;
  if (origin == node_.identity().fingerprint()) return;  // answered locally at issue time
  QueryId qid{};
  std::vector<std::string> terms;
  try {
    qid = array_from_hex<16>(body.at("query_id").get<std::string>());
    for (const auto& t : body.at("terms")) {
      auto norm = normalize_terms(t.get<std::string>());
      terms.insert(terms.end(), norm.begin(), norm.end());
    }
  } catch (const std::exception&) {
    return;
  }
  if (terms.empty()) return;
  if (!seen_queries_.insert({origin, qid}).second) {
    ++stats_.query_duplicates;
    return;
  }
  ++stats_.queries_handled;
  const auto* cert = node_.cert_of(origin);
  if (cert == nullptr) return;
  auto hit = answer(qid, terms, *cert);
  if (!hit) return;
  ++stats_.hits_sent;
  if (opt_.hits_via_group) {
    json msg{{"t", "hit"}, {"to", to_hex(origin)}, {"hit", hit->to_json()}};
    (void)lobby_->multicast(dump(msg), ordcast::Mode::fifo);
    return;
  }
  auto sid = net().connect(m.sender.addr, kHitService, this);
  streams_[sid] = StreamRole::hit_out;
  net().stream_send(sid, node_.seal_for(*cert, dump(hit->to_json())));
  net().stream_close(sid);
}

void FileShare::on_group_hit(const group::GroupMessage& m, const json& body) {
  if (body.value("to", "") != to_hex(node_.identity().fingerprint())) return;
  try {
    auto hit = QueryHit::from_json(body.at("hit"));
    if (hit.responder != m.sender.fingerprint) {
      ++stats_.hits_rejected;
      return;
    }
    deliver_hit(std::move(hit));
  } catch (const std::exception&) {
    ++stats_.hits_rejected;
  }
}

void FileShare::on_hit_frame(ByteView frame) {
  auto opened = node_.open_sealed(frame);
  if (!opened) {
    ++stats_.hits_rejected;
    return;
  }
  auto j = parse(opened->payload);
  if (!j) {
    ++stats_.hits_rejected;
    return;
  }
  try {
    auto hit = QueryHit::from_json(*j);
    if (hit.responder != opened->sender.fingerprint()) {
      ++stats_.hits_rejected;
      return;
    }
    deliver_hit(std::move(hit));
  } catch (const std::exception&) {
    ++stats_.hits_rejected;
  }
}

void FileShare::deliver_hit(QueryHit hit) {
  auto it = queries_.find(hit.query_id);
  if (it == queries_.end()) {
    ++stats_.hits_rejected;
    return;
  }
  for (const auto& e : hit.entries) {
    if (e.locator.responder != hit.responder) {
      ++stats_.hits_rejected;
      return;
    }
  }
  for (const auto& prior : it->second.hits) {
    if (prior.responder == hit.responder) return;
  }
  ++stats_.hits_received;
  emit("hit", json{{"query_id", to_hex(hit.query_id)}, {"hit", hit.to_json()}});
  it->second.hits.push_back(std::move(hit));
}

// ------------------------------------------------------------ streams

void FileShare::on_stream_open(netsim::StreamId id, const netsim::EndpointAddr&, const std::string& service) {
  if (service == kHitService) {
    streams_[id] = StreamRole::hit_in;
  } else if (service == kItemService) {
    streams_[id] = StreamRole::item_in;
  } else {
    net().stream_close(id);
  }
}

void FileShare::on_stream_message(netsim::StreamId id, Bytes message) {
  auto it = streams_.find(id);
  if (it == streams_.end()) return;
  switch (it->second) {
    case StreamRole::hit_in:
      on_hit_frame(message);
      break;
    case StreamRole::item_in:
      serve(id, message);
      break;
    case StreamRole::item_out:
      if (auto* j = job_by_stream(id)) on_item_response(*j, message);
      break;
    case StreamRole::hit_out:
      break;
  }
}

void FileShare::on_stream_closed(netsim::StreamId id, std::string_view reason) {
  auto it = streams_.find(id);
  if (it == streams_.end()) return;
  auto role = it->second;
  if (role == StreamRole::item_out) {
    if (auto* j = job_by_stream(id)) {
      fail(*j, reason == "connect" ? "connect" : "interrupted", true);
      return;
    }
  }
  streams_.erase(it);
  if (reason == "closed") net().stream_close(id);
}

// ------------------------------------------------------------ serving

void FileShare::serve(netsim::StreamId id, ByteView frame) {
  auto opened = node_.open_sealed(frame);
  if (!opened) {
    net().stream_close(id);
    streams_.erase(id);
    return;
  }
  ItemResponse resp;
  if (auto req = ItemRequest::parse(opened->payload)) {
    resp = serve_request(*req, opened->sender);
  } else {
    resp.status = 400;
  }
  if (resp.status == 206 && !resp.body.empty()) {
    // Every body byte that reaches a stream is counted here.
    served_[{opened->sender.fingerprint(), ItemRequest::parse(opened->payload)->entry_id}] += resp.body.size();
  }
  net().stream_send(id, node_.seal_for(opened->sender, resp.encode()));
}

ItemResponse FileShare::serve_request(const ItemRequest& req, const identity::IdentityCert& who) {
  ItemResponse resp;
  auto* e = index_.find_mutable(req.entry_id);
  if (e == nullptr) {
    resp.status = 404;
    return resp;
  }
  if (!authorized(*e, who)) {
    ++stats_.requests_denied;
    resp.status = 403;
    return resp;
  }
  auto mtime = file_mtime(e->path);
  if (mtime != e->mtime) {
    auto h = hash_file(e->path);
    if (!h || *h != e->entry_id) {
      ++stats_.requests_stale;
      resp.status = 410;
      return resp;
    }
    e->mtime = mtime;
    index_.save();
  }
  std::error_code ec;
  auto size = fs::file_size(e->path, ec);
  if (ec) {
    ++stats_.requests_stale;
    resp.status = 410;
    return resp;
  }
  resp.size = size;
  resp.from = req.from;
  if (req.from >= size) {
    resp.eof = true;
    return resp;
  }
  auto to = std::min({req.to, size - 1, req.from + kMaxServe - 1});
  resp.body.resize(to - req.from + 1);
  std::ifstream in(e->path, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(req.from));
  in.read(reinterpret_cast<char*>(resp.body.data()), static_cast<std::streamsize>(resp.body.size()));
  if (static_cast<std::size_t>(in.gcount()) != resp.body.size()) {
    ++stats_.requests_stale;
    return ItemResponse{410, 0, 0, false, {}};
  }
  resp.eof = to == size - 1;
  ++stats_.chunks_served;
  return resp;
}

// ------------------------------------------------------------ fetching

Result<std::uint64_t> FileShare::fetch(const HitEntry& entry, const fs::path& dest) {
  if (node_.cert_of(entry.locator.responder) == nullptr) {
    return Error(Errc::untrusted, "no certificate for the responding peer");
  }
  if (entry.locator.entry_id != entry.entry_id) return Error(Errc::invalid_argument, "locator mismatch");
  Job j;
  j.pub.id = next_job_++;
  j.pub.entry_id = entry.entry_id;
  j.pub.source = entry.locator;
  j.pub.name = entry.name;
  j.pub.size = entry.size;
  j.pub.dest = dest;
  j.pub.started = wall();
  auto id = j.pub.id;
  auto& job = jobs_.emplace(id, std::move(j)).first->second;
  job.have.assign(chunk_count(job), false);
  publish(job);
  schedule_jobs();
  return id;
}

const TransferJob* FileShare::job(std::uint64_t id) const {
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : &it->second.pub;
}

std::vector<TransferJob> FileShare::jobs() const {
  std::vector<TransferJob> out;
  for (const auto& [id, j] : jobs_) out.push_back(j.pub);
  return out;
}

std::optional<netsim::StreamId> FileShare::job_stream(std::uint64_t id) const {
  auto it = jobs_.find(id);
  if (it == jobs_.end() || !it->second.attempt) return std::nullopt;
  return it->second.attempt->stream;
}

FileShare::Job* FileShare::job_by_stream(netsim::StreamId id) {
  auto it = stream_job_.find(id);
  if (it == stream_job_.end()) return nullptr;
  auto jt = jobs_.find(it->second);
  return jt == jobs_.end() ? nullptr : &jt->second;
}

std::uint64_t FileShare::chunk_count(const Job& j) const {
  return std::max<std::uint64_t>(1, (j.pub.size + opt_.chunk_size - 1) / opt_.chunk_size);
}

void FileShare::publish(const Job& j) { emit("transfer", j.pub.to_json()); }

void FileShare::schedule_jobs() {
  std::size_t active = 0;
  for (const auto& [id, j] : jobs_) {
    auto s = j.pub.state;
    if (s == JobState::connecting || s == JobState::transferring || s == JobState::verifying) ++active;
  }
  for (auto& [id, j] : jobs_) {
    if (active >= opt_.max_jobs) break;
    if (j.pub.state != JobState::queued) continue;
    ++active;
    start_attempt(j);
  }
}

void FileShare::start_attempt(Job& j) {
  ++j.pub.attempts;
  j.pub.state = JobState::connecting;
  j.pub.reason.clear();
  auto part = part_path(j.pub.dest);
  std::error_code ec;
  if (!fs::exists(part, ec) || fs::file_size(part, ec) != j.pub.size) {
    std::ofstream create(part, std::ios::binary | std::ios::trunc);
    if (!create) {
      fail(j, "io", false);
      return;
    }
    create.close();
    fs::resize_file(part, j.pub.size, ec);
    if (ec) {
      fail(j, "io", false);
      return;
    }
    j.have.assign(chunk_count(j), false);
    j.pub.bytes_done = 0;
  }
  publish(j);
  Attempt a;
  a.stream = net().connect(j.pub.source.addr, kItemService, this);
  a.last_progress = net().now();
  streams_[a.stream] = StreamRole::item_out;
  stream_job_[a.stream] = j.pub.id;
  j.attempt = std::move(a);
  arm_stall(j);
  request_more(j);
}

void FileShare::request_more(Job& j) {
  auto& a = *j.attempt;
  const auto* cert = node_.cert_of(j.pub.source.responder);
  if (cert == nullptr) {
    fail(j, "untrusted", false);
    return;
  }
  auto n = chunk_count(j);
  while (a.inflight.size() < opt_.parallel_chunks) {
    while (j.next_chunk < n &&
           (j.have[j.next_chunk] || std::find(a.inflight.begin(), a.inflight.end(), j.next_chunk) != a.inflight.end())) {
      ++j.next_chunk;
    }
    if (j.next_chunk >= n) break;
    auto c = j.next_chunk++;
    ItemRequest req{j.pub.entry_id, c * opt_.chunk_size, c * opt_.chunk_size + opt_.chunk_size - 1};
    net().stream_send(a.stream, node_.seal_for(*cert, req.encode()));
    a.inflight.push_back(c);
  }
}

void FileShare::on_item_response(Job& j, ByteView frame) {
  if (!j.attempt || j.attempt->inflight.empty()) return;
  auto opened = node_.open_sealed(frame);
  if (!opened || opened->sender.fingerprint() != j.pub.source.responder) {
    fail(j, "auth", true);
    return;
  }
  auto resp = ItemResponse::parse(opened->payload);
  if (!resp) {
    fail(j, "protocol", true);
    return;
  }
  switch (resp->status) {
    case 206: break;
    case 403: fail(j, "denied", false); return;
    case 404: fail(j, "not-found", false); return;
    case 410: fail(j, "stale-entry", false); return;
    default: fail(j, "protocol", false); return;
  }
  auto& a = *j.attempt;
  auto c = a.inflight.front();
  a.inflight.pop_front();
  std::uint64_t offset = c * opt_.chunk_size;
  std::uint64_t expect = std::min(opt_.chunk_size, j.pub.size - std::min(j.pub.size, offset));
  if (resp->size != j.pub.size || resp->body.size() != expect || (expect != 0 && resp->from != offset)) {
    fail(j, "size-mismatch", false);
    return;
  }
  if (!resp->body.empty()) {
    std::fstream out(part_path(j.pub.dest), std::ios::binary | std::ios::in | std::ios::out);
    out.seekp(static_cast<std::streamoff>(offset));
    out.write(reinterpret_cast<const char*>(resp->body.data()), static_cast<std::streamsize>(resp->body.size()));
    if (!out) {
      fail(j, "io", false);
      return;
    }
  }
  j.have[c] = true;
  j.pub.bytes_done += resp->body.size();
  j.pub.bytes_received += resp->body.size();
  j.pub.state = JobState::transferring;
  a.last_progress = net().now();
  publish(j);
  if (std::all_of(j.have.begin(), j.have.end(), [](bool b) { return b; })) {
    finish_attempt(j, true);
    verify(j);
    return;
  }
  request_more(j);
}

void FileShare::verify(Job& j) {
  j.pub.state = JobState::verifying;
  publish(j);
  auto part = part_path(j.pub.dest);
  auto h = hash_file(part);
  std::error_code ec;
  if (!h || *h != j.pub.entry_id) {
    // Nothing verified survives: a retry starts from scratch.
    fs::remove(part, ec);
    j.have.assign(chunk_count(j), false);
    j.pub.bytes_done = 0;
    fail(j, "hash-mismatch", false);
    return;
  }
  fs::rename(part, j.pub.dest, ec);
  if (ec) {
    fail(j, "io", false);
    return;
  }
  j.pub.state = JobState::done;
  j.pub.finished = wall();
  publish(j);
  schedule_jobs();
}

void FileShare::finish_attempt(Job& j, bool close_stream) {
  if (j.timer) {
    net().cancel(*j.timer);
    j.timer.reset();
  }
  if (!j.attempt) return;
  auto sid = j.attempt->stream;
  if (close_stream) net().stream_close(sid);
  streams_.erase(sid);
  stream_job_.erase(sid);
  j.attempt.reset();
  j.next_chunk = 0;
}

void FileShare::fail(Job& j, const std::string& reason, bool retryable) {
  finish_attempt(j, true);
  j.pub.state = JobState::failed;
  j.pub.reason = reason;
  j.pub.finished = wall();
  j.pub.retrying = retryable && j.pub.attempts <= opt_.retries;
  publish(j);
  if (j.pub.retrying) {
    auto backoff = opt_.retry_backoff_ms << (j.pub.attempts - 1);
    auto id = j.pub.id;
    j.timer = net().schedule(backoff, [this, id] {
      auto& job = jobs_.at(id);
      job.timer.reset();
      job.pub.retrying = false;
      job.pub.state = JobState::queued;
      publish(job);
      schedule_jobs();
    });
  }
  schedule_jobs();
}

void FileShare::arm_stall(Job& j) {
  auto id = j.pub.id;
  j.timer = net().schedule(opt_.stall_ms, [this, id] {
    auto& job = jobs_.at(id);
    job.timer.reset();
    if (!job.attempt) return;
    if (net().now() - job.attempt->last_progress >= opt_.stall_ms) {
      fail(job, "stall", true);
    } else {
      arm_stall(job);
    }
  });
}

}  // namespace collab::fileshare
