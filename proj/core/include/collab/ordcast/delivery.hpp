#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "collab/common/bytes.hpp"

namespace collab::ordcast {

enum class Mode : std::uint8_t { fifo = 1, agreed = 2 };

constexpr std::size_t kMaxMessage = 64 * 1024;
constexpr std::size_t kFragmentPayload = 7 * 1024;
constexpr std::size_t kUnstableWindow = 512;

// One authenticated fragment as ordcast sees it. Senders are view indices.
struct SeqMsg {
  std::uint32_t sender = 0;
  std::uint64_t seq = 0;
  std::uint64_t ts = 0;
  Mode mode = Mode::fifo;
  bool control = false;
  std::uint16_t frag_index = 0;
  std::uint16_t frag_count = 1;
  Bytes payload;
  Bytes wire;  // exact frame bytes, kept for retransmission
};

// A reassembled message handed up the stack.
struct Delivery {
  std::uint32_t sender = 0;
  std::uint64_t seq = 0;  // seq of the final fragment
  std::uint64_t ts = 0;
  Mode mode = Mode::fifo;
  bool control = false;
  Bytes payload;
};

struct SeqRange {
  std::uint64_t from = 0;
  std::uint64_t to = 0;
  bool operator==(const SeqRange&) const = default;
};

// Per-view delivery engine: FIFO per sender, agreed order by (ts, sender)
// once every member's heard timestamp covers the candidate. Pure; the owner
// feeds it authenticated fragments and heartbeats.
class DeliveryState {
 public:
  DeliveryState(std::size_t members, std::uint32_t self);

  std::size_t size() const { return senders_.size(); }
  std::uint32_t self() const { return self_; }

  // Local send: the next (seq, ts) pair. The caller builds the frame and then
  // feeds it back through accept().
  std::uint64_t next_seq() const { return senders_[self_].sent + 1; }
  std::uint64_t stamp();
  std::uint64_t clock() const { return clock_; }
  std::uint64_t sent() const { return senders_[self_].sent; }

  // False for duplicates and for seqs already delivered or collected.
  bool accept(SeqMsg msg);
  bool has(std::uint32_t sender, std::uint64_t seq) const;

  // Null message: `sender` had clock `ts` after sending `max_seq`.
  void on_heartbeat(std::uint32_t sender, std::uint64_t ts, std::uint64_t max_seq);
  // Piggybacked delivered vector from `reporter`.
  void on_ack_vector(std::uint32_t reporter, const std::vector<std::uint64_t>& delivered);

  // Normal delivery. While frozen only FIFO control heads come out.
  std::vector<Delivery> drain();

  // Flush: freeze, then deliver everything up to `cut` regardless of heard
  // timestamps (agreed residue in (ts, sender) order). Fragments above the
  // cut are discarded, as are incomplete messages straddling it.
  void freeze() { frozen_ = true; }
  void thaw() { frozen_ = false; }
  bool frozen() const { return frozen_; }
  std::vector<Delivery> deliver_cut(const std::vector<std::uint64_t>& cut);

  std::uint64_t contiguous(std::uint32_t sender) const { return senders_[sender].contiguous; }
  std::uint64_t delivered(std::uint32_t sender) const { return senders_[sender].delivered; }
  std::uint64_t known_max(std::uint32_t sender) const { return senders_[sender].known_max; }
  std::uint64_t heard(std::uint32_t sender) const;
  std::vector<std::uint64_t> contiguous_vector() const;
  std::vector<std::uint64_t> delivered_vector() const;

  // A flush cut or heartbeat proves `seq` was sent.
  void note_known(std::uint32_t sender, std::uint64_t seq);
  // Gaps below the highest seq known to exist, optionally capped.
  std::vector<SeqRange> missing(std::uint32_t sender, std::uint64_t cap = UINT64_MAX) const;
  bool has_gaps() const;
  // Stored frames in [from, to].
  std::vector<const Bytes*> stored(std::uint32_t sender, SeqRange range) const;

  std::uint64_t stable(std::uint32_t sender) const;
  std::size_t gc();
  std::size_t buffered() const;
  std::size_t buffered_from(std::uint32_t sender) const;
  std::uint64_t unstable_own() const { return sent() - stable(self_); }
  bool window_full(std::size_t window = kUnstableWindow) const { return unstable_own() >= window; }

  std::uint64_t duplicates() const { return duplicates_; }

 private:
  struct Sender {
    std::map<std::uint64_t, SeqMsg> store;  // undelivered + delivered-but-unstable
    std::uint64_t contiguous = 0;
    std::uint64_t delivered = 0;
    std::uint64_t known_max = 0;
    std::uint64_t sent = 0;  // own sender only
    std::uint64_t heard_ts = 0;
    std::optional<std::pair<std::uint64_t, std::uint64_t>> pending_hb;  // (ts, max_seq)
    Bytes partial;
    std::uint16_t partial_next = 0;
    bool partial_broken = false;
  };

  void advance_contiguous(Sender& s);
  const SeqMsg* head(std::uint32_t sender) const;
  std::optional<Delivery> pop_head(std::uint32_t sender);
  std::vector<Delivery> run(bool force, const std::vector<std::uint64_t>* cut);

  std::vector<Sender> senders_;
  std::vector<std::vector<std::uint64_t>> acks_;  // [reporter][sender]
  std::uint32_t self_;
  std::uint64_t clock_ = 0;
  bool frozen_ = false;
  std::uint64_t duplicates_ = 0;
};

// Splits a payload into fragment payloads of at most kFragmentPayload bytes.
std::vector<Bytes> fragment(ByteView payload);

}  // namespace collab::ordcast
