#pragma once

#include <cstdint>
#include <span>

#include "sessrec/data.hpp"
#include "sessrec/model.hpp"

namespace sessrec {

enum class PredictMode {
  mc_mean,     // mean of the score vectors of mc_samples posterior draws
  mean_state,  // score the posterior mean (zero-noise shortcut)
};

struct EvalConfig {
  std::size_t k = 20;
  std::size_t mc_samples = 10;  // posterior draws per prediction
  PredictMode mode = PredictMode::mc_mean;
  std::uint64_t seed = 1;
};

struct EvalReport {
  double recall_at_k = 0.0;
  double mrr_at_k = 0.0;
  std::uint64_t events_evaluated = 0;
  std::uint64_t events_skipped = 0;  // targets outside the model vocabulary
};

/// Next-item scores from the current posterior state.
Vector predict_scores(const ModelParams& model, const PosteriorState& state,
                      const EvalConfig& config, RngState& rng);

/// 1-based rank of target: 1 + |{j : s_j > s_t}| + |{j < t : s_j == s_t}|
/// (ties broken toward the smaller index).
std::size_t rank_of(const Vector& scores, std::uint32_t target);

/// Teacher-forced walk over each session: the recurrence always consumes
/// the true clicked item. Per-session RNG streams are derived from
/// (config.seed, session id), so the report does not depend on session
/// scheduling.
EvalReport evaluate(const ModelParams& model, std::span<const Session> sessions,
                    const EvalConfig& config);

}  // namespace sessrec
