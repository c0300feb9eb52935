#include "sessrec/vgru.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace sessrec {

VgruParams VgruParams::zeros(std::size_t latent_dim, std::size_t vocab_size) {
  if (latent_dim < 1) throw std::invalid_argument("VgruParams: latent_dim must be >= 1");
  if (vocab_size < 1) throw std::invalid_argument("VgruParams: vocab_size must be >= 1");
  VgruParams p;
  p.latent_dim = latent_dim;
  p.vocab_size = vocab_size;
  const std::size_t s = latent_dim + 1;
  p.in_update = Matrix(s, vocab_size);
  p.rec_update = Matrix(s, s);
  p.in_reset = Matrix(s, vocab_size);
  p.rec_reset = Matrix(s, s);
  p.in_cand = Matrix(s, vocab_size);
  p.rec_cand = Matrix(s, s);
  return p;
}

VgruGrads VgruGrads::zeros(std::size_t latent_dim, std::size_t vocab_size) {
  VgruGrads g;
  const std::size_t s = latent_dim + 1;
  g.in_update = Matrix(s, vocab_size);
  g.rec_update = Matrix(s, s);
  g.in_reset = Matrix(s, vocab_size);
  g.rec_reset = Matrix(s, s);
  g.in_cand = Matrix(s, vocab_size);
  g.rec_cand = Matrix(s, s);
  return g;
}

PosteriorState init_state(std::size_t latent_dim) {
  if (latent_dim < 1) throw std::invalid_argument("init_state: latent_dim must be >= 1");
  PosteriorState s;
  s.mu = Vector(latent_dim, 0.0);
  s.log_var = 0.0;
  return s;
}

Vector concat_state(const PosteriorState& s) {
  Vector v(s.mu.size() + 1);
  for (std::size_t d = 0; d < s.mu.size(); ++d) v[d] = s.mu[d];
  v.back() = s.log_var;
  return v;
}

PosteriorState split_state(const Vector& v) {
  if (v.empty()) throw std::invalid_argument("split_state: empty state vector");
  PosteriorState s;
  s.mu.assign(v.begin(), v.end() - 1);
  s.log_var = v.back();
  return s;
}

namespace {

// Shared forward core; writes the gate activations and the new state.
void step_core(const VgruParams& p, const Vector& state_in, std::uint32_t item,
               GateActivations& gates, Vector& state_out) {
  if (item >= p.vocab_size) {
    throw std::out_of_range("step: item index " + std::to_string(item) +
                            " out of range (vocab size " +
                            std::to_string(p.vocab_size) + ")");
  }
  const std::size_t s = p.state_dim();
  if (state_in.size() != s) throw std::invalid_argument("step: state dimension mismatch");

  Vector pre_update = matvec(p.rec_update, state_in);
  Vector pre_reset = matvec(p.rec_reset, state_in);
  for (std::size_t d = 0; d < s; ++d) {
    pre_update[d] += p.in_update(d, item);
    pre_reset[d] += p.in_reset(d, item);
  }
  gates.update = sigmoid(pre_update);
  gates.reset = sigmoid(pre_reset);

  Vector gated(s);
  for (std::size_t d = 0; d < s; ++d) gated[d] = gates.reset[d] * state_in[d];
  Vector pre_cand = matvec(p.rec_cand, gated);
  for (std::size_t d = 0; d < s; ++d) pre_cand[d] += p.in_cand(d, item);
  gates.candidate = tanh_vec(pre_cand);

  state_out.resize(s);
  for (std::size_t d = 0; d < s; ++d) {
    state_out[d] = (1.0 - gates.update[d]) * state_in[d] +
                   gates.update[d] * gates.candidate[d];
  }
}

}  // namespace

StepResult step(const VgruParams& params, const PosteriorState& prev,
                std::uint32_t item) {
  StepResult r;
  Vector out;
  step_core(params, concat_state(prev), item, r.gates, out);
  r.state = split_state(out);
  return r;
}

StepTape step_recorded(const VgruParams& params, const PosteriorState& prev,
                       std::uint32_t item) {
  StepTape t;
  t.item = item;
  t.state_in = concat_state(prev);
  step_core(params, t.state_in, item, t.gates, t.state_out);
  return t;
}

LatentSample sample_with_eps(const PosteriorState& state, Vector eps) {
  if (eps.size() != state.mu.size()) {
    throw std::invalid_argument("sample_with_eps: eps length mismatch");
  }
  LatentSample s;
  const double sigma = std::exp(0.5 * state.log_var);
  s.h.resize(state.mu.size());
  for (std::size_t d = 0; d < state.mu.size(); ++d) {
    s.h[d] = state.mu[d] + sigma * eps[d];
  }
  s.eps = std::move(eps);
  return s;
}

LatentSample sample(const PosteriorState& state, RngState& rng) {
  return sample_with_eps(state, rng.draw_std_normal(state.mu.size()));
}

double kl_to_prior(const PosteriorState& state) {
  const double s2 = std::exp(state.log_var);
  double mu_sq = 0.0;
  for (double m : state.mu) mu_sq += m * m;
  const double d = static_cast<double>(state.mu.size());
  return 0.5 * (mu_sq + d * (s2 - 1.0 - state.log_var));
}

Vector step_backward(const StepTape& tape, const Vector& grad_state_out,
                     const VgruParams& params, VgruGrads& grads) {
  const std::size_t s = params.state_dim();
  if (grad_state_out.size() != s) {
    throw std::invalid_argument("step_backward: gradient dimension mismatch");
  }
  const Vector& sin = tape.state_in;
  const Vector& z = tape.gates.update;
  const Vector& r = tape.gates.reset;
  const Vector& c = tape.gates.candidate;

  Vector grad_state_in(s, 0.0);
  Vector grad_pre_cand(s);
  Vector gated(s);  // r .* state_in, as used in the forward pass
  for (std::size_t d = 0; d < s; ++d) {
    const double g = grad_state_out[d];
    grad_state_in[d] = g * (1.0 - z[d]);
    grad_pre_cand[d] = g * z[d] * (1.0 - c[d] * c[d]);
    gated[d] = r[d] * sin[d];
  }

  add_column(grads.in_cand, tape.item, grad_pre_cand);
  add_outer(grads.rec_cand, grad_pre_cand, gated);

  const Vector grad_gated = matvec_transposed(params.rec_cand, grad_pre_cand);
  Vector grad_pre_reset(s);
  Vector grad_pre_update(s);
  for (std::size_t d = 0; d < s; ++d) {
    grad_state_in[d] += grad_gated[d] * r[d];
    grad_pre_reset[d] = grad_gated[d] * sin[d] * r[d] * (1.0 - r[d]);
    const double grad_update = grad_state_out[d] * (c[d] - sin[d]);
    grad_pre_update[d] = grad_update * z[d] * (1.0 - z[d]);
  }

  add_column(grads.in_reset, tape.item, grad_pre_reset);
  add_outer(grads.rec_reset, grad_pre_reset, sin);
  add_column(grads.in_update, tape.item, grad_pre_update);
  add_outer(grads.rec_update, grad_pre_update, sin);

  const Vector via_reset = matvec_transposed(params.rec_reset, grad_pre_reset);
  const Vector via_update = matvec_transposed(params.rec_update, grad_pre_update);
  for (std::size_t d = 0; d < s; ++d) {
    grad_state_in[d] += via_reset[d] + via_update[d];
  }
  return grad_state_in;
}

}  // namespace sessrec
