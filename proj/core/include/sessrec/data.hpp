#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sessrec/rng.hpp"

namespace sessrec {

struct Event {
  std::int64_t timestamp = 0;  // epoch seconds
  std::uint32_t item = 0;      // dense vocabulary index
};

struct Session {
  std::string id;
  std::vector<Event> events;  // time-ordered

  std::int64_t start_time() const { return events.empty() ? 0 : events.front().timestamp; }
};

/// Bijection raw item id <-> dense index 0..m-1, in order of first appearance.
class ItemVocab {
 public:
  std::uint32_t add(std::string_view raw);  // get-or-insert
  std::optional<std::uint32_t> find(std::string_view raw) const;
  const std::string& raw(std::uint32_t index) const;
  std::size_t size() const { return ids_.size(); }

  bool operator==(const ItemVocab& other) const { return ids_ == other.ids_; }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct Corpus {
  std::vector<Session> sessions;
  ItemVocab vocab;
};

// ---------------------------------------------------------------------------
// Ingestion: delimiter-separated text, columns (session_id, timestamp,
// item_id). Timestamps are epoch seconds or ISO-8601; fractional seconds are
// truncated. Rows are grouped by session id and time-sorted within a
// session; sessions are ordered by start time. Sessions with fewer than two
// events are dropped (no prediction target exists), but their items still
// enter the vocabulary.

enum class HeaderMode { auto_detect, yes, no };

struct IngestOptions {
  char delimiter = ',';
  HeaderMode header = HeaderMode::auto_detect;
  bool strict = false;  // malformed row: strict -> DataError, else skip+count
};

struct IngestStats {
  std::uint64_t rows_parsed = 0;
  std::uint64_t rows_skipped = 0;
  std::uint64_t singleton_sessions_dropped = 0;
  std::uint64_t sessions = 0;
  std::uint64_t events = 0;
};

Corpus ingest(const std::string& path, const IngestOptions& options = {},
              IngestStats* stats = nullptr);

/// Parse "1396868809", "1396868809.123" or "2014-04-07T10:51:09.277Z" to
/// epoch seconds.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

// ---------------------------------------------------------------------------
// Train/test split. Partitions are disjoint and exhaustive; afterwards, test
// events whose item never occurs in a train session are removed (counted),
// and test sessions left with fewer than two events are dropped (counted).

enum class SplitKind { by_time, by_count, by_hash };

struct SplitRule {
  SplitKind kind = SplitKind::by_count;
  std::int64_t cutoff = 0;      // by_time: test = sessions starting after this
  std::size_t test_count = 1;   // by_count: last n sessions (corpus order)
  double fraction = 0.1;        // by_hash
  std::uint64_t seed = 1;       // by_hash
};

struct SplitStats {
  std::uint64_t filtered_test_events = 0;
  std::uint64_t dropped_test_sessions = 0;
};

struct SplitResult {
  std::vector<Session> train;
  std::vector<Session> test;
};

SplitResult split(std::vector<Session> sessions, const SplitRule& rule,
                  SplitStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Session-parallel mini-batches: each of beta lanes tracks one active
// session and advances one (input, target) event pair per step; exhausted
// lanes are refilled from the session queue in corpus order, and lanes with
// nothing left to refill are masked out.

struct SessionBatch {
  std::vector<std::uint32_t> inputs;
  std::vector<std::uint32_t> targets;
  std::vector<bool> reset;   // lane begins a new session at this step
  std::vector<bool> active;  // false: masked out, excluded from loss
  // Diagnostics: which session occupies the lane and the index of the input
  // event within it. Valid only where active.
  std::vector<std::uint32_t> session_index;
  std::vector<std::uint32_t> event_index;
};

class Batcher {
 public:
  /// order, when nonempty, permutes the session queue. Sessions with fewer
  /// than two events are skipped. If fewer usable sessions than batch_size
  /// exist, the batch size is lowered (see lowered()).
  Batcher(std::span<const Session> sessions, std::size_t batch_size,
          std::vector<std::uint32_t> order = {});

  std::optional<SessionBatch> next();

  std::size_t batch_size() const { return lanes_.size(); }
  bool lowered() const { return lowered_; }

 private:
  struct Lane {
    std::uint32_t session = 0;
    std::uint32_t cursor = 0;
    bool pending_reset = false;
    bool occupied = false;
  };

  bool refill(Lane& lane);

  std::span<const Session> sessions_;
  std::vector<std::uint32_t> order_;
  std::size_t next_session_ = 0;
  std::vector<Lane> lanes_;
  bool lowered_ = false;
};

// ---------------------------------------------------------------------------
// Synthetic corpora for verification. Deterministic under seed. The cyclic
// kind (item i -> i+1 mod m) is perfectly predictable; markov draws from an
// explicit order-1 transition matrix.

enum class TransitionKind { uniform, cyclic, markov };

/// Sparse row-stochastic transition matrix: row i holds (next_item,
/// probability) pairs summing to 1.
using TransitionMatrix = std::vector<std::vector<std::pair<std::uint32_t, double>>>;

struct SyntheticSpec {
  std::size_t item_count = 2;  // m >= 2
  std::size_t session_count = 1;
  std::size_t min_len = 2;
  std::size_t max_len = 2;
  TransitionKind kind = TransitionKind::uniform;
  TransitionMatrix transition;  // required for markov
  std::uint64_t seed = 1;
};

Corpus gen_synthetic(const SyntheticSpec& spec);

/// Random sparse transition matrix with `branching` distinct successors per
/// item; useful to build markov corpora.
TransitionMatrix random_sparse_transition(std::size_t item_count,
                                          std::size_t branching, RngState& rng);

}  // namespace sessrec
