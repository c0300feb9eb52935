#pragma once

#include <cstdint>

#include "sessrec/linalg.hpp"
#include "sessrec/rng.hpp"

namespace sessrec {

// Variational GRU cell. The recurrent state is the parameter pair of a
// Gaussian posterior over the latent activations: D means plus one shared
// log-variance, carried as a single (D+1)-vector through standard GRU gate
// arithmetic. Sampling never feeds back into the recurrence; only the
// (mu, log_var) pair propagates.

/// Cell weights. Input matrices are applied by column lookup (the input is
/// one item index out of vocab_size), recurrent matrices act on the
/// (D+1)-dimensional state.
struct VgruParams {
  std::size_t latent_dim = 0;  // D
  std::size_t vocab_size = 0;  // m

  Matrix in_update, rec_update;  // (D+1) x m, (D+1) x (D+1)
  Matrix in_reset, rec_reset;
  Matrix in_cand, rec_cand;

  static VgruParams zeros(std::size_t latent_dim, std::size_t vocab_size);
  std::size_t state_dim() const { return latent_dim + 1; }
};

/// Posterior N(mu, exp(log_var) * I) over the latent activations.
struct PosteriorState {
  Vector mu;             // length D
  double log_var = 0.0;  // shared across dimensions
};

/// Pre-session state: the prior N(0, I) expressed as posterior parameters.
PosteriorState init_state(std::size_t latent_dim);

/// Gate outputs of one step; update/reset in (0,1), candidate in (-1,1),
/// all of length D+1.
struct GateActivations {
  Vector update;
  Vector reset;
  Vector candidate;
};

struct StepResult {
  PosteriorState state;
  GateActivations gates;
};

/// One reparameterized draw h = mu + exp(log_var/2) * eps.
struct LatentSample {
  Vector h;
  Vector eps;
};

/// Everything the backward pass needs to differentiate one step.
struct StepTape {
  std::uint32_t item = 0;
  Vector state_in;   // [mu, log_var] before the step
  GateActivations gates;
  Vector state_out;  // [mu, log_var] after the step
  bool severed = false;  // lane was reset before this step: no gradient
                         // flows into state_in
};

/// Parameter gradients, shaped like VgruParams.
struct VgruGrads {
  Matrix in_update, rec_update;
  Matrix in_reset, rec_reset;
  Matrix in_cand, rec_cand;

  static VgruGrads zeros(std::size_t latent_dim, std::size_t vocab_size);
};

Vector concat_state(const PosteriorState& s);
PosteriorState split_state(const Vector& v);

/// Advance the recurrence by one observed item.
/// Throws std::out_of_range if item >= vocab_size.
StepResult step(const VgruParams& params, const PosteriorState& prev,
                std::uint32_t item);

/// As step(), but records the tape for step_backward().
StepTape step_recorded(const VgruParams& params, const PosteriorState& prev,
                       std::uint32_t item);

LatentSample sample_with_eps(const PosteriorState& state, Vector eps);
LatentSample sample(const PosteriorState& state, RngState& rng);

/// KL[q || N(0, I)] = 1/2 * (sum_d mu_d^2 + D*(s2 - 1 - log s2)),
/// s2 = exp(log_var). Nonnegative; zero exactly at the prior.
double kl_to_prior(const PosteriorState& state);

/// Reverse-mode derivatives of one recorded step. Accumulates the six
/// weight gradients into grads and returns d(objective)/d(state_in).
Vector step_backward(const StepTape& tape, const Vector& grad_state_out,
                     const VgruParams& params, VgruGrads& grads);

}  // namespace sessrec
