#include "collab/membership/suspicion.hpp"

#include <algorithm>

#include "collab/common/error.hpp"

namespace collab::membership {

void ProcessId::encode(Writer& w) const {
  w.raw(fingerprint);
  addr.encode(w);
}

ProcessId ProcessId::decode(Reader& r) {
  ProcessId p;
  p.fingerprint = r.fixed<32>();
  p.addr = netsim::EndpointAddr::decode(r);
  return p;
}

std::string ProcessId::short_name() const {
  return to_hex(ByteView(fingerprint.data(), 4)) + "@" + addr.to_string();
}

void ViewId::encode(Writer& w) const {
  w.u64(epoch);
  initiator.encode(w);
}

ViewId ViewId::decode(Reader& r) {
  ViewId v;
  v.epoch = r.u64();
  v.initiator = ProcessId::decode(r);
  return v;
}

std::string ViewId::to_string() const { return std::to_string(epoch) + "/" + initiator.short_name(); }

bool View::contains(const ProcessId& p) const { return std::binary_search(members.begin(), members.end(), p); }

std::optional<std::size_t> View::index_of(const ProcessId& p) const {
  auto it = std::lower_bound(members.begin(), members.end(), p);
  if (it == members.end() || *it != p) return std::nullopt;
  return static_cast<std::size_t>(it - members.begin());
}

void validate_group_name(const GroupId& group) {
  if (group.empty() || group.size() > kMaxGroupName) {
    throw Error(Errc::invalid_argument, "group name must be 1..128 bytes");
  }
}

void View::validate() const {
  validate_group_name(group);
  if (members.empty()) throw Error(Errc::invalid_argument, "view has no members");
  if (members.size() > 0xFFFF) throw Error(Errc::invalid_argument, "view too large");
  for (std::size_t i = 1; i < members.size(); ++i) {
    if (!(members[i - 1] < members[i])) throw Error(Errc::invalid_argument, "view members not sorted/unique");
  }
  if (id.epoch == 0) throw Error(Errc::invalid_argument, "view epoch must be positive");
}

void View::encode(Writer& w) const {
  w.str8(group);
  id.encode(w);
  w.u16(static_cast<std::uint16_t>(members.size()));
  for (const auto& m : members) m.encode(w);
}

View View::decode(Reader& r) {
  View v;
  v.group = r.str8();
  v.id = ViewId::decode(r);
  auto n = r.u16();
  v.members.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) v.members.push_back(ProcessId::decode(r));
  try {
    v.validate();
  } catch (const Error& e) {
    throw Error(Errc::decode, e.what());
  }
  return v;
}

std::vector<ProcessId> sorted_unique(std::vector<ProcessId> members) {
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  return members;
}

void SuspicionState::reset(const View& view, const ProcessId& self, netsim::SimTime now) {
  std::map<ProcessId, netsim::SimTime> next;
  for (const auto& m : view.members) {
    if (m == self) continue;
    auto it = last_heard.find(m);
    next[m] = it == last_heard.end() ? now : std::max(it->second, now);
  }
  last_heard = std::move(next);
  suspects.clear();
}

void SuspicionState::heard(const ProcessId& p, netsim::SimTime now) {
  auto it = last_heard.find(p);
  if (it != last_heard.end() && it->second < now) it->second = now;
}

std::set<ProcessId> suspicion_check(SuspicionState& state, netsim::SimTime now, netsim::SimTime timeout) {
  std::set<ProcessId> fresh;
  for (const auto& [p, t] : state.last_heard) {
    if (now - t > timeout && state.suspects.insert(p).second) fresh.insert(p);
  }
  return fresh;
}

std::optional<ProcessId> coordinator_of(const std::vector<ProcessId>& members, const std::set<ProcessId>& suspects) {
  for (const auto& m : members) {
    if (suspects.count(m) == 0) return m;
  }
  return std::nullopt;
}

}  // namespace collab::membership
