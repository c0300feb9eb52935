#include "sessrec/model.hpp"

#include <cmath>
#include <stdexcept>

namespace sessrec {

ModelGrads ModelGrads::zeros(std::size_t latent_dim, std::size_t vocab_size) {
  ModelGrads g;
  g.cell = VgruGrads::zeros(latent_dim, vocab_size);
  g.output = Matrix(vocab_size, latent_dim);
  return g;
}

namespace {

template <typename Grads, typename Fn>
void for_each_matrix(Grads& g, Fn&& fn) {
  fn(g.cell.in_update);
  fn(g.cell.rec_update);
  fn(g.cell.in_reset);
  fn(g.cell.rec_reset);
  fn(g.cell.in_cand);
  fn(g.cell.rec_cand);
  fn(g.output);
}

}  // namespace

void ModelGrads::scale(double factor) {
  for_each_matrix(*this, [factor](Matrix& m) {
    for (double& x : m.data) x *= factor;
  });
}

bool ModelGrads::finite() const {
  bool ok = true;
  for_each_matrix(*this, [&ok](const Matrix& m) { ok = ok && all_finite(m); });
  return ok;
}

double glorot_sigma(std::size_t rows, std::size_t cols) {
  return std::sqrt(2.0 / static_cast<double>(rows + cols));
}

Matrix glorot_normal(std::size_t rows, std::size_t cols, RngState& rng) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("glorot_normal: empty shape");
  Matrix m(rows, cols);
  const double sigma = glorot_sigma(rows, cols);
  const Vector draws = rng.draw_std_normal(rows * cols);
  for (std::size_t i = 0; i < draws.size(); ++i) m.data[i] = sigma * draws[i];
  return m;
}

ModelParams init_model(std::size_t latent_dim, std::size_t vocab_size, RngState& rng) {
  ModelParams model;
  model.cell = VgruParams::zeros(latent_dim, vocab_size);
  const std::size_t s = model.cell.state_dim();
  model.cell.in_update = glorot_normal(s, vocab_size, rng);
  model.cell.rec_update = glorot_normal(s, s, rng);
  model.cell.in_reset = glorot_normal(s, vocab_size, rng);
  model.cell.rec_reset = glorot_normal(s, s, rng);
  model.cell.in_cand = glorot_normal(s, vocab_size, rng);
  model.cell.rec_cand = glorot_normal(s, s, rng);
  model.out.weights = glorot_normal(vocab_size, latent_dim, rng);
  model.accum = ModelGrads::zeros(latent_dim, vocab_size);
  model.velocity = ModelGrads::zeros(latent_dim, vocab_size);
  return model;
}

Vector dropout_mask(std::size_t n, double rate, RngState& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout_mask: rate must be in [0, 1)");
  Vector mask(n);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = rng.next_unit() < rate ? 0.0 : keep_scale;
  }
  return mask;
}

Vector apply_dropout(const Vector& v, double rate, RngState& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("apply_dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0) return v;
  const Vector mask = dropout_mask(v.size(), rate, rng);
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * mask[i];
  return out;
}

void adagrad_nesterov_update(Matrix& weights, const Matrix& grads, Matrix& accum,
                             Matrix& velocity, double step_size, double momentum) {
  if (weights.rows != grads.rows || weights.cols != grads.cols) {
    throw std::invalid_argument("adagrad_nesterov_update: shape mismatch");
  }
  constexpr double kFuzz = 1e-8;
  for (std::size_t i = 0; i < weights.data.size(); ++i) {
    const double g = grads.data[i];
    accum.data[i] += g * g;
    const double step = step_size * g / (std::sqrt(accum.data[i]) + kFuzz);
    const double u = momentum * velocity.data[i] - step;
    velocity.data[i] = u;
    weights.data[i] += momentum * u - step;
  }
}

bool apply_update(ModelParams& model, const ModelGrads& grads, double step_size,
                  double momentum) {
  if (!grads.finite()) return false;
  auto update = [&](Matrix& w, const Matrix& g, Matrix& a, Matrix& u) {
    adagrad_nesterov_update(w, g, a, u, step_size, momentum);
  };
  update(model.cell.in_update, grads.cell.in_update, model.accum.cell.in_update,
         model.velocity.cell.in_update);
  update(model.cell.rec_update, grads.cell.rec_update, model.accum.cell.rec_update,
         model.velocity.cell.rec_update);
  update(model.cell.in_reset, grads.cell.in_reset, model.accum.cell.in_reset,
         model.velocity.cell.in_reset);
  update(model.cell.rec_reset, grads.cell.rec_reset, model.accum.cell.rec_reset,
         model.velocity.cell.rec_reset);
  update(model.cell.in_cand, grads.cell.in_cand, model.accum.cell.in_cand,
         model.velocity.cell.in_cand);
  update(model.cell.rec_cand, grads.cell.rec_cand, model.accum.cell.rec_cand,
         model.velocity.cell.rec_cand);
  update(model.out.weights, grads.output, model.accum.output, model.velocity.output);
  return true;
}

}  // namespace sessrec
