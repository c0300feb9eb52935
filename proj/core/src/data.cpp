#include "sessrec/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "sessrec/error.hpp"

namespace sessrec {

std::uint32_t ItemVocab::add(std::string_view raw) {
  auto it = index_.find(std::string(raw));
  if (it != index_.end()) return it->second;
  const auto idx = static_cast<std::uint32_t>(ids_.size());
  ids_.emplace_back(raw);
  index_.emplace(ids_.back(), idx);
  return idx;
}

std::optional<std::uint32_t> ItemVocab::find(std::string_view raw) const {
  auto it = index_.find(std::string(raw));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& ItemVocab::raw(std::uint32_t index) const {
  if (index >= ids_.size()) throw std::out_of_range("ItemVocab::raw: index out of range");
  return ids_[index];
}

// ---------------------------------------------------------------------------
// Timestamp parsing

namespace {

// Days since 1970-01-01 for a civil date (Howard Hinnant's algorithm).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

bool parse_uint(std::string_view s, unsigned& out) {
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  if (text.empty()) return std::nullopt;

  // ISO-8601: YYYY-MM-DD[T ]HH:MM:SS[.frac][Z]
  if (text.size() >= 19 && text[4] == '-' && text[7] == '-' &&
      (text[10] == 'T' || text[10] == ' ')) {
    unsigned year, month, day, hour, minute, second;
    if (!parse_uint(text.substr(0, 4), year) || !parse_uint(text.substr(5, 2), month) ||
        !parse_uint(text.substr(8, 2), day) || !parse_uint(text.substr(11, 2), hour) ||
        !parse_uint(text.substr(14, 2), minute) || !parse_uint(text.substr(17, 2), second)) {
      return std::nullopt;
    }
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 ||
        minute > 59 || second > 60) {
      return std::nullopt;
    }
    // Fractional seconds are truncated; only UTC ("Z" or nothing) accepted.
    std::string_view rest = text.substr(19);
    if (!rest.empty() && rest.front() == '.') {
      std::size_t i = 1;
      while (i < rest.size() && rest[i] >= '0' && rest[i] <= '9') ++i;
      if (i == 1) return std::nullopt;
      rest = rest.substr(i);
    }
    if (!rest.empty() && rest != "Z") return std::nullopt;
    return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
  }

  // Epoch seconds, integer or with a fractional part (truncated).
  std::int64_t whole = 0;
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, whole);
  if (ec != std::errc()) return std::nullopt;
  if (p == end) return whole;
  if (*p != '.') return std::nullopt;
  std::string_view frac(p + 1, static_cast<std::size_t>(end - p - 1));
  if (frac.empty()) return std::nullopt;
  for (char c : frac) {
    if (c < '0' || c > '9') return std::nullopt;
  }
  return whole;
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

struct RawRow {
  std::string_view session_id;
  std::int64_t timestamp;
  std::string_view item_id;
};

bool split_fields(std::string_view line, char delimiter,
                  std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields.size() >= 3;
}

bool parse_row(std::string_view line, char delimiter,
               std::vector<std::string_view>& fields, RawRow& row) {
  if (!split_fields(line, delimiter, fields)) return false;
  if (fields[0].empty() || fields[2].empty()) return false;
  const auto ts = parse_timestamp(fields[1]);
  if (!ts) return false;
  row = {fields[0], *ts, fields[2]};
  return true;
}

}  // namespace

Corpus ingest(const std::string& path, const IngestOptions& options,
              IngestStats* stats) {
  std::ifstream in(path);
  if (!in) throw DataError("ingest: cannot open " + path);

  Corpus corpus;
  IngestStats local;
  std::unordered_map<std::string, std::size_t> session_slot;
  std::vector<Session> sessions;  // first-appearance order

  std::string line;
  std::vector<std::string_view> fields;
  bool first_line = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    RawRow row;
    const bool ok = parse_row(line, options.delimiter, fields, row);
    if (first_line) {
      first_line = false;
      if (options.header == HeaderMode::yes) continue;
      if (options.header == HeaderMode::auto_detect && !ok) continue;
    }
    if (!ok) {
      if (options.strict) throw DataError("ingest: malformed row: " + line);
      ++local.rows_skipped;
      continue;
    }
    ++local.rows_parsed;

    const std::uint32_t item = corpus.vocab.add(row.item_id);
    auto [it, inserted] = session_slot.try_emplace(std::string(row.session_id), sessions.size());
    if (inserted) sessions.push_back(Session{std::string(row.session_id), {}});
    sessions[it->second].events.push_back(Event{row.timestamp, item});
  }

  for (auto& s : sessions) {
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    if (s.events.size() < 2) {
      ++local.singleton_sessions_dropped;
      continue;
    }
    corpus.sessions.push_back(std::move(s));
  }
  std::stable_sort(corpus.sessions.begin(), corpus.sessions.end(),
                   [](const Session& a, const Session& b) {
                     return a.start_time() < b.start_time();
                   });

  if (corpus.sessions.empty()) {
    throw DataError("ingest: no usable sessions in " + path + " (" +
                    std::to_string(local.singleton_sessions_dropped) +
                    " singletons dropped, " + std::to_string(local.rows_skipped) +
                    " rows skipped)");
  }

  local.sessions = corpus.sessions.size();
  for (const auto& s : corpus.sessions) local.events += s.events.size();
  if (stats) *stats = local;
  return corpus;
}

// ---------------------------------------------------------------------------
// Split

SplitResult split(std::vector<Session> sessions, const SplitRule& rule,
                  SplitStats* stats) {
  SplitResult result;
  SplitStats local;

  switch (rule.kind) {
    case SplitKind::by_time:
      for (auto& s : sessions) {
        (s.start_time() > rule.cutoff ? result.test : result.train).push_back(std::move(s));
      }
      break;
    case SplitKind::by_count: {
      if (rule.test_count >= sessions.size()) {
        throw DataError("split: test_count " + std::to_string(rule.test_count) +
                        " leaves no training sessions");
      }
      const std::size_t boundary = sessions.size() - rule.test_count;
      for (std::size_t i = 0; i < sessions.size(); ++i) {
        (i < boundary ? result.train : result.test).push_back(std::move(sessions[i]));
      }
      break;
    }
    case SplitKind::by_hash:
      for (auto& s : sessions) {
        const double u = static_cast<double>(derive_stream_seed(rule.seed, s.id) >> 11) * 0x1.0p-53;
        (u < rule.fraction ? result.test : result.train).push_back(std::move(s));
      }
      break;
  }

  if (result.train.empty()) throw DataError("split: empty training partition");
  if (result.test.empty()) throw DataError("split: empty test partition");

  // The model can only score items it saw in training; drop other test events.
  std::unordered_set<std::uint32_t> train_items;
  for (const auto& s : result.train) {
    for (const auto& e : s.events) train_items.insert(e.item);
  }
  std::vector<Session> filtered;
  filtered.reserve(result.test.size());
  for (auto& s : result.test) {
    std::vector<Event> kept;
    kept.reserve(s.events.size());
    for (const auto& e : s.events) {
      if (train_items.contains(e.item)) {
        kept.push_back(e);
      } else {
        ++local.filtered_test_events;
      }
    }
    if (kept.size() < 2) {
      ++local.dropped_test_sessions;
      continue;
    }
    s.events = std::move(kept);
    filtered.push_back(std::move(s));
  }
  result.test = std::move(filtered);
  if (result.test.empty()) throw DataError("split: test partition empty after vocabulary filtering");

  if (stats) *stats = local;
  return result;
}

// ---------------------------------------------------------------------------
// Session-parallel batcher

Batcher::Batcher(std::span<const Session> sessions, std::size_t batch_size,
                 std::vector<std::uint32_t> order)
    : sessions_(sessions), order_(std::move(order)) {
  if (batch_size < 1) throw std::invalid_argument("Batcher: batch_size must be >= 1");
  if (order_.empty()) {
    order_.resize(sessions.size());
    std::iota(order_.begin(), order_.end(), 0u);
  } else if (order_.size() != sessions.size()) {
    throw std::invalid_argument("Batcher: order size mismatch");
  }

  std::size_t usable = 0;
  for (const auto& s : sessions_) {
    if (s.events.size() >= 2) ++usable;
  }
  const std::size_t lanes = std::min(batch_size, usable);
  lowered_ = lanes < batch_size;
  lanes_.resize(lanes);
  for (auto& lane : lanes_) refill(lane);
}

bool Batcher::refill(Lane& lane) {
  while (next_session_ < order_.size()) {
    const std::uint32_t idx = order_[next_session_++];
    if (sessions_[idx].events.size() < 2) continue;
    lane.session = idx;
    lane.cursor = 0;
    lane.pending_reset = true;
    lane.occupied = true;
    return true;
  }
  lane.occupied = false;
  return false;
}

std::optional<SessionBatch> Batcher::next() {
  if (lanes_.empty()) return std::nullopt;
  SessionBatch batch;
  const std::size_t beta = lanes_.size();
  batch.inputs.assign(beta, 0);
  batch.targets.assign(beta, 0);
  batch.reset.assign(beta, false);
  batch.active.assign(beta, false);
  batch.session_index.assign(beta, 0);
  batch.event_index.assign(beta, 0);

  bool any_active = false;
  for (std::size_t i = 0; i < beta; ++i) {
    Lane& lane = lanes_[i];
    if (lane.occupied &&
        lane.cursor + 1 >= sessions_[lane.session].events.size()) {
      lane.occupied = false;
    }
    if (!lane.occupied && !refill(lane)) continue;

    const Session& s = sessions_[lane.session];
    batch.inputs[i] = s.events[lane.cursor].item;
    batch.targets[i] = s.events[lane.cursor + 1].item;
    batch.reset[i] = lane.pending_reset;
    batch.active[i] = true;
    batch.session_index[i] = lane.session;
    batch.event_index[i] = lane.cursor;
    lane.pending_reset = false;
    ++lane.cursor;
    any_active = true;
  }
  if (!any_active) return std::nullopt;
  return batch;
}

// ---------------------------------------------------------------------------
// Synthetic data

TransitionMatrix random_sparse_transition(std::size_t item_count,
                                          std::size_t branching, RngState& rng) {
  if (item_count < 2) throw std::invalid_argument("random_sparse_transition: item_count must be >= 2");
  branching = std::clamp<std::size_t>(branching, 1, item_count);
  TransitionMatrix matrix(item_count);
  std::vector<std::uint32_t> pool(item_count);
  for (std::size_t i = 0; i < item_count; ++i) {
    std::iota(pool.begin(), pool.end(), 0u);
    // Partial Fisher-Yates: the first `branching` entries become successors.
    for (std::size_t k = 0; k < branching; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.next_below(item_count - k));
      std::swap(pool[k], pool[j]);
    }
    double total = 0.0;
    std::vector<double> weights(branching);
    for (auto& w : weights) {
      w = rng.next_unit_open();
      total += w;
    }
    auto& row = matrix[i];
    row.reserve(branching);
    for (std::size_t k = 0; k < branching; ++k) {
      row.emplace_back(pool[k], weights[k] / total);
    }
  }
  return matrix;
}

namespace {

std::uint32_t draw_from_row(const std::vector<std::pair<std::uint32_t, double>>& row,
                            RngState& rng) {
  const double u = rng.next_unit();
  double cum = 0.0;
  for (const auto& [item, prob] : row) {
    cum += prob;
    if (u < cum) return item;
  }
  return row.back().first;
}

std::string synthetic_id(std::size_t k) {
  std::string digits = std::to_string(k);
  return "s" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

}  // namespace

Corpus gen_synthetic(const SyntheticSpec& spec) {
  if (spec.item_count < 2) throw std::invalid_argument("gen_synthetic: item_count must be >= 2");
  if (spec.session_count < 1) throw std::invalid_argument("gen_synthetic: session_count must be >= 1");
  if (spec.min_len < 1 || spec.min_len > spec.max_len) {
    throw std::invalid_argument("gen_synthetic: bad length range");
  }
  if (spec.kind == TransitionKind::markov) {
    if (spec.transition.size() != spec.item_count) {
      throw std::invalid_argument("gen_synthetic: transition matrix must have one row per item");
    }
    for (const auto& row : spec.transition) {
      double total = 0.0;
      if (row.empty()) throw std::invalid_argument("gen_synthetic: empty transition row");
      for (const auto& [item, prob] : row) {
        if (item >= spec.item_count || prob <= 0.0) {
          throw std::invalid_argument("gen_synthetic: bad transition entry");
        }
        total += prob;
      }
      if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("gen_synthetic: transition row does not sum to 1");
      }
    }
  }

  RngState rng(spec.seed);
  Corpus corpus;
  for (std::size_t i = 0; i < spec.item_count; ++i) {
    corpus.vocab.add(std::to_string(i));
  }

  const auto m = static_cast<std::uint32_t>(spec.item_count);
  for (std::size_t k = 0; k < spec.session_count; ++k) {
    const std::size_t len =
        spec.min_len + static_cast<std::size_t>(rng.next_below(spec.max_len - spec.min_len + 1));
    const std::int64_t start = 1'000'000 + static_cast<std::int64_t>(k) * 1000;
    Session session;
    session.id = synthetic_id(k);
    session.events.reserve(len);
    auto item = static_cast<std::uint32_t>(rng.next_below(m));
    for (std::size_t t = 0; t < len; ++t) {
      session.events.push_back(Event{start + static_cast<std::int64_t>(t), item});
      switch (spec.kind) {
        case TransitionKind::uniform:
          item = static_cast<std::uint32_t>(rng.next_below(m));
          break;
        case TransitionKind::cyclic:
          item = (item + 1) % m;
          break;
        case TransitionKind::markov:
          item = draw_from_row(spec.transition[item], rng);
          break;
      }
    }
    corpus.sessions.push_back(std::move(session));
  }
  return corpus;
}

}  // namespace sessrec
