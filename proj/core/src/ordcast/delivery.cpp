#include "collab/ordcast/delivery.hpp"

#include <algorithm>

#include "collab/common/error.hpp"

namespace collab::ordcast {

DeliveryState::DeliveryState(std::size_t members, std::uint32_t self)
    : senders_(members), acks_(members, std::vector<std::uint64_t>(members, 0)), self_(self) {
  if (members == 0 || self >= members) throw Error(Errc::invalid_argument, "bad delivery state membership");
}

std::uint64_t DeliveryState::stamp() {
  senders_[self_].sent += 1;
  return ++clock_;
}

std::uint64_t DeliveryState::heard(std::uint32_t sender) const {
  return sender == self_ ? clock_ : senders_[sender].heard_ts;
}

bool DeliveryState::has(std::uint32_t sender, std::uint64_t seq) const {
  const auto& s = senders_[sender];
  return seq <= s.delivered || s.store.count(seq) != 0;
}

void DeliveryState::advance_contiguous(Sender& s) {
  while (true) {
    auto it = s.store.find(s.contiguous + 1);
    if (it == s.store.end()) break;
    ++s.contiguous;
    s.heard_ts = std::max(s.heard_ts, it->second.ts);
  }
  if (s.pending_hb && s.contiguous >= s.pending_hb->second) {
    s.heard_ts = std::max(s.heard_ts, s.pending_hb->first);
    s.pending_hb.reset();
  }
}

bool DeliveryState::accept(SeqMsg msg) {
  if (msg.sender >= senders_.size() || msg.seq == 0) return false;
  auto& s = senders_[msg.sender];
  if (msg.seq <= s.delivered || s.store.count(msg.seq) != 0) {
    ++duplicates_;
    return false;
  }
  clock_ = std::max(clock_, msg.ts);
  s.known_max = std::max(s.known_max, msg.seq);
  auto seq = msg.seq;
  s.store.emplace(seq, std::move(msg));
  if (seq == s.contiguous + 1) advance_contiguous(s);
  return true;
}

void DeliveryState::on_heartbeat(std::uint32_t sender, std::uint64_t ts, std::uint64_t max_seq) {
  if (sender >= senders_.size() || sender == self_) return;
  auto& s = senders_[sender];
  clock_ = std::max(clock_, ts);
  s.known_max = std::max(s.known_max, max_seq);
  if (s.contiguous >= max_seq) {
    s.heard_ts = std::max(s.heard_ts, ts);
  } else if (!s.pending_hb || s.pending_hb->first < ts) {
    // Only the newest claim matters; it covers every earlier one.
    s.pending_hb = std::make_pair(ts, max_seq);
  }
}

void DeliveryState::on_ack_vector(std::uint32_t reporter, const std::vector<std::uint64_t>& delivered) {
  if (reporter >= acks_.size() || delivered.size() != senders_.size()) return;
  auto& row = acks_[reporter];
  for (std::size_t i = 0; i < row.size(); ++i) row[i] = std::max(row[i], delivered[i]);
}

void DeliveryState::note_known(std::uint32_t sender, std::uint64_t seq) {
  auto& s = senders_[sender];
  s.known_max = std::max(s.known_max, seq);
}

std::uint64_t DeliveryState::stable(std::uint32_t sender) const {
  std::uint64_t m = senders_[sender].delivered;
  for (std::size_t r = 0; r < acks_.size(); ++r) {
    if (r == self_) continue;
    m = std::min(m, acks_[r][sender]);
  }
  return m;
}

std::size_t DeliveryState::gc() {
  std::size_t purged = 0;
  for (std::uint32_t i = 0; i < senders_.size(); ++i) {
    auto limit = stable(i);
    auto& store = senders_[i].store;
    auto end = store.upper_bound(limit);
    purged += static_cast<std::size_t>(std::distance(store.begin(), end));
    store.erase(store.begin(), end);
  }
  return purged;
}

std::size_t DeliveryState::buffered() const {
  std::size_t n = 0;
  for (const auto& s : senders_) n += s.store.size();
  return n;
}

std::size_t DeliveryState::buffered_from(std::uint32_t sender) const { return senders_[sender].store.size(); }

const SeqMsg* DeliveryState::head(std::uint32_t sender) const {
  const auto& s = senders_[sender];
  if (s.delivered >= s.contiguous) return nullptr;
  return &s.store.at(s.delivered + 1);
}

std::optional<Delivery> DeliveryState::pop_head(std::uint32_t sender) {
  auto& s = senders_[sender];
  const auto& m = s.store.at(++s.delivered);
  // Reassembly: fragments of one message occupy consecutive seqs.
  if (m.frag_index == 0) {
    s.partial.clear();
    s.partial_next = 0;
    s.partial_broken = false;
  }
  if (m.frag_index != s.partial_next || m.frag_count == 0 || m.frag_index >= m.frag_count) s.partial_broken = true;
  s.partial.insert(s.partial.end(), m.payload.begin(), m.payload.end());
  s.partial_next = static_cast<std::uint16_t>(m.frag_index + 1);
  if (m.frag_index + 1 != m.frag_count) return std::nullopt;
  bool broken = s.partial_broken;
  Delivery d{sender, m.seq, m.ts, m.mode, m.control, std::move(s.partial)};
  s.partial = {};
  s.partial_next = 0;
  s.partial_broken = false;
  if (broken) return std::nullopt;
  return d;
}

std::vector<Delivery> DeliveryState::run(bool force, const std::vector<std::uint64_t>* cut) {
  std::vector<Delivery> out;
  auto limit = [&](std::uint32_t s) { return cut != nullptr ? (*cut)[s] : UINT64_MAX; };
  auto in_cut = [&](std::uint32_t s, const SeqMsg* m) { return m != nullptr && m->seq <= limit(s); };
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::uint32_t s = 0; s < senders_.size(); ++s) {
      for (const SeqMsg* m = head(s); in_cut(s, m) && m->mode == Mode::fifo; m = head(s)) {
        if (auto d = pop_head(s)) out.push_back(std::move(*d));
        progress = true;
      }
    }
    const SeqMsg* best = nullptr;
    for (std::uint32_t s = 0; s < senders_.size(); ++s) {
      const SeqMsg* m = head(s);
      if (!in_cut(s, m)) continue;
      if (best == nullptr || m->ts < best->ts || (m->ts == best->ts && m->sender < best->sender)) best = m;
    }
    if (best == nullptr) break;
    if (!force) {
      for (std::uint32_t q = 0; q < senders_.size(); ++q) {
        if (heard(q) < best->ts) return out;
      }
    }
    if (auto d = pop_head(best->sender)) out.push_back(std::move(*d));
    progress = true;
  }
  return out;
}

std::vector<Delivery> DeliveryState::drain() {
  if (!frozen_) return run(false, nullptr);
  // Key agreement traffic keeps flowing during a flush; it always precedes a
  // sender's application messages.
  std::vector<Delivery> out;
  for (std::uint32_t s = 0; s < senders_.size(); ++s) {
    for (const SeqMsg* m = head(s); m != nullptr && m->control && m->mode == Mode::fifo; m = head(s)) {
      if (auto d = pop_head(s)) out.push_back(std::move(*d));
    }
  }
  return out;
}

std::vector<Delivery> DeliveryState::deliver_cut(const std::vector<std::uint64_t>& cut) {
  if (cut.size() != senders_.size()) throw Error(Errc::invalid_argument, "cut size mismatch");
  for (std::uint32_t s = 0; s < senders_.size(); ++s) {
    if (senders_[s].contiguous < cut[s]) throw Error(Errc::precondition, "cut not yet reached");
  }
  frozen_ = true;
  auto out = run(true, &cut);
  for (std::uint32_t s = 0; s < senders_.size(); ++s) {
    auto& st = senders_[s];
    st.store.erase(st.store.upper_bound(cut[s]), st.store.end());
    st.contiguous = std::min(st.contiguous, cut[s]);
  }
  return out;
}

std::vector<std::uint64_t> DeliveryState::contiguous_vector() const {
  std::vector<std::uint64_t> v;
  for (const auto& s : senders_) v.push_back(s.contiguous);
  return v;
}

std::vector<std::uint64_t> DeliveryState::delivered_vector() const {
  std::vector<std::uint64_t> v;
  for (const auto& s : senders_) v.push_back(s.delivered);
  return v;
}

std::vector<SeqRange> DeliveryState::missing(std::uint32_t sender, std::uint64_t cap) const {
  const auto& s = senders_[sender];
  std::vector<SeqRange> out;
  std::uint64_t top = std::min(s.known_max, cap);
  std::uint64_t next = s.contiguous + 1;
  for (auto it = s.store.upper_bound(s.contiguous); next <= top; ++it) {
    std::uint64_t have = it == s.store.end() ? UINT64_MAX : it->first;
    if (have > next) out.push_back({next, std::min(have - 1, top)});
    if (it == s.store.end()) break;
    next = have + 1;
  }
  return out;
}

bool DeliveryState::has_gaps() const {
  for (const auto& s : senders_) {
    if (s.known_max > s.contiguous) return true;
  }
  return false;
}

std::vector<const Bytes*> DeliveryState::stored(std::uint32_t sender, SeqRange range) const {
  std::vector<const Bytes*> out;
  if (sender >= senders_.size()) return out;
  const auto& store = senders_[sender].store;
  for (auto it = store.lower_bound(range.from); it != store.end() && it->first <= range.to; ++it) {
    out.push_back(&it->second.wire);
  }
  return out;
}

std::vector<Bytes> fragment(ByteView payload) {
  if (payload.size() > kMaxMessage) throw Error(Errc::oversize, "message exceeds 64 KiB");
  std::vector<Bytes> out;
  std::size_t off = 0;
  do {
    std::size_t n = std::min(kFragmentPayload, payload.size() - off);
    out.emplace_back(payload.begin() + static_cast<std::ptrdiff_t>(off),
                     payload.begin() + static_cast<std::ptrdiff_t>(off + n));
    off += n;
  } while (off < payload.size());
  return out;
}

}  // namespace collab::ordcast
