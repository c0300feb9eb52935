#include "sessrec/eval.hpp"

#include <stdexcept>

#include "sessrec/error.hpp"

namespace sessrec {

Vector predict_scores(const ModelParams& model, const PosteriorState& state,
                      const EvalConfig& config, RngState& rng) {
  if (config.mode == PredictMode::mean_state) {
    return score_all(model.out, state.mu);
  }
  if (config.mc_samples < 1) throw UsageError("predict_scores: mc_samples must be >= 1");
  Vector mean(model.vocab_size(), 0.0);
  for (std::size_t g = 0; g < config.mc_samples; ++g) {
    const LatentSample smp = sample(state, rng);
    const Vector scores = score_all(model.out, smp.h);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += scores[j];
  }
  const double inv = 1.0 / static_cast<double>(config.mc_samples);
  for (double& x : mean) x *= inv;
  return mean;
}

std::size_t rank_of(const Vector& scores, std::uint32_t target) {
  if (target >= scores.size()) throw std::out_of_range("rank_of: target out of range");
  const double st = scores[target];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > st || (scores[j] == st && j < target)) ++rank;
  }
  return rank;
}

EvalReport evaluate(const ModelParams& model, std::span<const Session> sessions,
                    const EvalConfig& config) {
  if (config.k < 1) throw UsageError("evaluate: k must be >= 1");
  EvalReport report;
  const std::size_t vocab = model.vocab_size();
  double hits = 0.0;
  double rr_sum = 0.0;

  for (const auto& session : sessions) {
    if (session.events.size() < 2) continue;
    RngState rng(derive_stream_seed(config.seed, session.id));
    PosteriorState state = init_state(model.latent_dim());
    for (std::size_t i = 0; i + 1 < session.events.size(); ++i) {
      const std::uint32_t input = session.events[i].item;
      const std::uint32_t target = session.events[i + 1].item;
      if (input >= vocab) {
        // Cannot advance the recurrence past an unknown item.
        ++report.events_skipped;
        break;
      }
      state = step(model.cell, state, input).state;
      if (target >= vocab) {
        ++report.events_skipped;
        continue;
      }
      const Vector scores = predict_scores(model, state, config, rng);
      const std::size_t rank = rank_of(scores, target);
      if (rank <= config.k) {
        hits += 1.0;
        rr_sum += 1.0 / static_cast<double>(rank);
      }
      ++report.events_evaluated;
    }
  }

  if (report.events_evaluated > 0) {
    const double inv = 1.0 / static_cast<double>(report.events_evaluated);
    report.recall_at_k = hits * inv;
    report.mrr_at_k = rr_sum * inv;
  }
  return report;
}

}  // namespace sessrec
