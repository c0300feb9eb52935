#include "sessrec/objective.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sessrec/error.hpp"

namespace sessrec {

namespace {
constexpr double kScoreClamp = 1e-12;
}

OutputParams OutputParams::zeros(std::size_t latent_dim, std::size_t vocab_size) {
  OutputParams p;
  p.weights = Matrix(vocab_size, latent_dim);
  return p;
}

Vector score_logits(const OutputParams& out, const Vector& h) {
  return matvec(out.weights, h);
}

Vector score_all(const OutputParams& out, const Vector& h) {
  return sigmoid(score_logits(out, h));
}

double cross_entropy(const Vector& scores, std::uint32_t target) {
  if (target >= scores.size()) throw std::out_of_range("cross_entropy: target out of range");
  double loss = 0.0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const double s = std::clamp(scores[j], kScoreClamp, 1.0 - kScoreClamp);
    loss -= (j == target) ? std::log(s) : std::log(1.0 - s);
  }
  return loss;
}

Vector cross_entropy_logit_grad(const Vector& scores, std::uint32_t target) {
  if (target >= scores.size()) throw std::out_of_range("cross_entropy_logit_grad: target out of range");
  Vector g = scores;
  g[target] -= 1.0;
  return g;
}

namespace {

void check_top1_args(const Vector& logits, std::uint32_t target,
                     std::span<const std::uint32_t> negatives) {
  if (target >= logits.size()) throw std::out_of_range("top1: target out of range");
  if (negatives.empty()) throw std::invalid_argument("top1: empty negatives");
  for (std::uint32_t j : negatives) {
    if (j >= logits.size()) throw std::out_of_range("top1: negative index out of range");
    if (j == target) throw std::invalid_argument("top1: target appears in negatives");
  }
}

}  // namespace

std::pair<double, double> top1_loss_parts(const Vector& logits,
                                          std::uint32_t target,
                                          std::span<const std::uint32_t> negatives) {
  check_top1_args(logits, target, negatives);
  const double lt = logits[target];
  double rank_term = 0.0;
  double reg_term = 0.0;
  for (std::uint32_t j : negatives) {
    const double lj = logits[j];
    rank_term += sigmoid(lj - lt);
    reg_term += sigmoid(lj * lj);
  }
  const double inv_n = 1.0 / static_cast<double>(negatives.size());
  return {rank_term * inv_n, reg_term * inv_n};
}

double top1_loss(const Vector& logits, std::uint32_t target,
                 std::span<const std::uint32_t> negatives) {
  const auto [rank_term, reg_term] = top1_loss_parts(logits, target, negatives);
  return rank_term + reg_term;
}

std::vector<std::pair<std::uint32_t, double>> top1_logit_grad(
    const Vector& logits, std::uint32_t target,
    std::span<const std::uint32_t> negatives) {
  check_top1_args(logits, target, negatives);
  const double lt = logits[target];
  const double inv_n = 1.0 / static_cast<double>(negatives.size());
  std::vector<std::pair<std::uint32_t, double>> grad;
  grad.reserve(negatives.size() + 1);
  double target_coef = 0.0;
  for (std::uint32_t j : negatives) {
    const double lj = logits[j];
    const double sd = sigmoid(lj - lt);
    const double sr = sigmoid(lj * lj);
    const double coef = inv_n * (sd * (1.0 - sd) + sr * (1.0 - sr) * 2.0 * lj);
    grad.emplace_back(j, coef);
    target_coef -= inv_n * sd * (1.0 - sd);
  }
  grad.emplace_back(target, target_coef);
  return grad;
}

Vector output_backward(const OutputParams& out, const Vector& h,
                       const Vector& grad_logits, Matrix& grad_weights) {
  add_outer(grad_weights, grad_logits, h);
  return matvec_transposed(out.weights, grad_logits);
}

Vector output_backward_sparse(
    const OutputParams& out, const Vector& h,
    std::span<const std::pair<std::uint32_t, double>> grad_logits,
    Matrix& grad_weights) {
  Vector grad_h(h.size(), 0.0);
  for (const auto& [item, coef] : grad_logits) {
    add_row(grad_weights, item, coef, h);
    for (std::size_t d = 0; d < h.size(); ++d) {
      grad_h[d] += coef * out.weights(item, d);
    }
  }
  return grad_h;
}

LossValue elbo_step_loss(double kl, double data_loss, double kl_weight) {
  if (kl < 0.0) {
    throw NumericError("elbo_step_loss: negative KL (" + std::to_string(kl) + ")");
  }
  LossValue v;
  v.data_term = data_loss;
  v.kl_term = kl;
  v.total = data_loss + kl_weight * kl;
  return v;
}

}  // namespace sessrec
