#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sessrec/linalg.hpp"

namespace sessrec {

// Output scoring layer and ranking losses. Scores are independent per-item
// sigmoids; ranking only needs their order, so no normalization is applied.

/// Output weights; row j scores item j.
struct OutputParams {
  Matrix weights;  // vocab_size x latent_dim

  static OutputParams zeros(std::size_t latent_dim, std::size_t vocab_size);
};

/// Raw per-item logits w_j . h.
Vector score_logits(const OutputParams& out, const Vector& h);

/// Per-item scores sigmoid(w_j . h), each in (0,1).
Vector score_all(const OutputParams& out, const Vector& h);

/// One-hot cross-entropy over the full item set:
///   -log(scores[target]) - sum_{j != target} log(1 - scores[j]).
/// Scores are clamped to [1e-12, 1 - 1e-12] before the logs, so the loss is
/// finite under saturation.
double cross_entropy(const Vector& scores, std::uint32_t target);

/// d(cross_entropy)/d(logits): scores - onehot(target). Exact for the
/// unclamped loss; the clamp only binds at |logit| > ~27.6.
Vector cross_entropy_logit_grad(const Vector& scores, std::uint32_t target);

/// Pairwise TOP1 ranking loss over raw logits:
///   (1/|N|) * sum_{j in N} sigmoid(l_j - l_target) + sigmoid(l_j^2).
/// Throws std::invalid_argument on empty negatives or target in negatives.
double top1_loss(const Vector& logits, std::uint32_t target,
                 std::span<const std::uint32_t> negatives);

/// Ranking and regularizer terms of top1_loss, separately (their sum is the
/// loss). The ranking term depends on logits only through differences.
std::pair<double, double> top1_loss_parts(const Vector& logits,
                                          std::uint32_t target,
                                          std::span<const std::uint32_t> negatives);

/// Sparse d(top1_loss)/d(logits) as (item, coefficient) pairs covering the
/// target and each negative occurrence.
std::vector<std::pair<std::uint32_t, double>> top1_logit_grad(
    const Vector& logits, std::uint32_t target,
    std::span<const std::uint32_t> negatives);

/// Backward through the scoring layer: given dL/dlogits, accumulates
/// dL/dweights into grad_weights and returns dL/dh.
Vector output_backward(const OutputParams& out, const Vector& h,
                       const Vector& grad_logits, Matrix& grad_weights);

/// Sparse variant for pairwise losses.
Vector output_backward_sparse(
    const OutputParams& out, const Vector& h,
    std::span<const std::pair<std::uint32_t, double>> grad_logits,
    Matrix& grad_weights);

/// Per-event loss assembly: total = data_term + kl_weight * kl_term.
struct LossValue {
  double data_term = 0.0;
  double kl_term = 0.0;
  double total = 0.0;
};

/// Throws NumericError if kl < 0.
LossValue elbo_step_loss(double kl, double data_loss, double kl_weight);

}  // namespace sessrec
