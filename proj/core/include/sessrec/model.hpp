#pragma once

#include <cstdint>

#include "sessrec/objective.hpp"
#include "sessrec/rng.hpp"
#include "sessrec/vgru.hpp"

namespace sessrec {

/// Gradients for the full model, shaped like the trainable weights.
struct ModelGrads {
  VgruGrads cell;
  Matrix output;  // vocab_size x latent_dim

  static ModelGrads zeros(std::size_t latent_dim, std::size_t vocab_size);
  void scale(double factor);
  bool finite() const;
};

/// All trainable weights plus their Adagrad accumulators and Nesterov
/// momentum velocities (same shapes, pinned iteration order).
struct ModelParams {
  VgruParams cell;
  OutputParams out;
  ModelGrads accum;     // sum of squared gradients, per weight
  ModelGrads velocity;  // momentum state, per weight

  std::size_t latent_dim() const { return cell.latent_dim; }
  std::size_t vocab_size() const { return cell.vocab_size; }
};

double glorot_sigma(std::size_t rows, std::size_t cols);

/// Entries drawn N(0, 2/(fan_in + fan_out)) with fan_in = cols, fan_out =
/// rows; row-major fill order.
Matrix glorot_normal(std::size_t rows, std::size_t cols, RngState& rng);

/// Glorot-initialized model; draws weights in the pinned order
/// in_update, rec_update, in_reset, rec_reset, in_cand, rec_cand, output.
ModelParams init_model(std::size_t latent_dim, std::size_t vocab_size, RngState& rng);

/// Inverted dropout mask: each entry is 0 with probability rate, otherwise
/// 1/(1-rate). Consumes exactly n uniform draws. rate must be in [0, 1).
Vector dropout_mask(std::size_t n, double rate, RngState& rng);

/// Training: multiply by a fresh mask (identity when rate == 0, no draws
/// consumed). Inference: identity regardless of rate, no draws consumed.
Vector apply_dropout(const Vector& v, double rate, RngState& rng, bool training);

/// One Adagrad step with Nesterov momentum, per weight w with gradient g:
///   G += g^2
///   a  = step_size * g / (sqrt(G) + 1e-8)
///   u  = momentum * u - a
///   w += momentum * u - a
void adagrad_nesterov_update(Matrix& weights, const Matrix& grads, Matrix& accum,
                             Matrix& velocity, double step_size, double momentum);

/// Applies the update to all seven weight matrices. Returns false (and
/// leaves the model untouched) if any gradient entry is non-finite.
bool apply_update(ModelParams& model, const ModelGrads& grads, double step_size,
                  double momentum);

}  // namespace sessrec
