#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sessrec/model.hpp"
#include "sessrec/rng.hpp"
#include "sessrec/vgru.hpp"

using namespace sessrec;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

VgruParams random_params(std::size_t latent_dim, std::size_t vocab_size,
                         std::uint64_t seed) {
  RngState rng(seed);
  VgruParams p = VgruParams::zeros(latent_dim, vocab_size);
  for (Matrix* m : {&p.in_update, &p.rec_update, &p.in_reset, &p.rec_reset,
                    &p.in_cand, &p.rec_cand}) {
    for (double& x : m->data) x = rng.draw_std_normal(1)[0] * 0.5;
  }
  return p;
}

PosteriorState random_state(std::size_t latent_dim, RngState& rng) {
  PosteriorState s;
  s.mu = rng.draw_std_normal(latent_dim);
  s.log_var = rng.draw_std_normal(1)[0] * 0.5;
  return s;
}

// Independent straight-line transcription of the posterior recurrence,
// written against plain nested vectors with no library calls.
struct ReferenceCell {
  std::vector<std::vector<double>> wu, ru, wr, rr, wc, rc;  // [row][col]

  static std::vector<std::vector<double>> to_nested(const Matrix& m) {
    std::vector<std::vector<double>> out(m.rows, std::vector<double>(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i) {
      for (std::size_t j = 0; j < m.cols; ++j) out[i][j] = m(i, j);
    }
    return out;
  }

  explicit ReferenceCell(const VgruParams& p)
      : wu(to_nested(p.in_update)),
        ru(to_nested(p.rec_update)),
        wr(to_nested(p.in_reset)),
        rr(to_nested(p.rec_reset)),
        wc(to_nested(p.in_cand)),
        rc(to_nested(p.rec_cand)) {}

  std::vector<double> step(const std::vector<double>& state, std::size_t item) const {
    const std::size_t n = state.size();
    std::vector<double> z(n), r(n), cand(n), out(n);
    for (std::size_t d = 0; d < n; ++d) {
      double az = wu[d][item];
      double ar = wr[d][item];
      for (std::size_t k = 0; k < n; ++k) {
        az += ru[d][k] * state[k];
        ar += rr[d][k] * state[k];
      }
      z[d] = 1.0 / (1.0 + std::exp(-az));
      r[d] = 1.0 / (1.0 + std::exp(-ar));
    }
    for (std::size_t d = 0; d < n; ++d) {
      double ac = wc[d][item];
      for (std::size_t k = 0; k < n; ++k) ac += rc[d][k] * (r[k] * state[k]);
      cand[d] = std::tanh(ac);
    }
    for (std::size_t d = 0; d < n; ++d) {
      out[d] = (1.0 - z[d]) * state[d] + z[d] * cand[d];
    }
    return out;
  }
};

}  // namespace

TEST_CASE("init_state is the prior") {
  const PosteriorState s = init_state(3);
  CHECK(s.mu == Vector{0.0, 0.0, 0.0});
  CHECK(s.log_var == 0.0);
  CHECK(kl_to_prior(s) == 0.0);

  const PosteriorState s1 = init_state(1);
  CHECK(s1.mu == Vector{0.0});
  CHECK(s1.log_var == 0.0);
}

TEST_CASE("step with zero weights halves the state") {
  const VgruParams p = VgruParams::zeros(2, 4);
  PosteriorState prev;
  prev.mu = {0.8, -0.4};
  prev.log_var = 0.2;
  const StepResult r = step(p, prev, 1);
  for (double z : r.gates.update) CHECK(z == 0.5);
  for (double g : r.gates.reset) CHECK(g == 0.5);
  for (double c : r.gates.candidate) CHECK(c == 0.0);
  CHECK(r.state.mu[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(r.state.mu[1] == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(r.state.log_var == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("prior state is a fixed point of the zero-weight cell") {
  const VgruParams p = VgruParams::zeros(2, 4);
  const StepResult r = step(p, init_state(2), 0);
  CHECK(r.state.mu == Vector{0.0, 0.0});
  CHECK(r.state.log_var == 0.0);
}

TEST_CASE("step matches an independent straight-line re-implementation") {
  const VgruParams p = random_params(2, 5, 7);
  const ReferenceCell reference(p);
  RngState rng(70);
  for (std::uint32_t item = 0; item < 5; ++item) {
    const PosteriorState prev = random_state(2, rng);
    const StepResult got = step(p, prev, item);
    const std::vector<double> expect =
        reference.step({prev.mu[0], prev.mu[1], prev.log_var}, item);
    CHECK(got.state.mu[0] == doctest::Approx(expect[0]).epsilon(1e-14));
    CHECK(got.state.mu[1] == doctest::Approx(expect[1]).epsilon(1e-14));
    CHECK(got.state.log_var == doctest::Approx(expect[2]).epsilon(1e-14));
  }
}

TEST_CASE("step rejects out-of-range items") {
  const VgruParams p = VgruParams::zeros(2, 4);
  CHECK_THROWS_AS(step(p, init_state(2), 4), std::out_of_range);
}

TEST_CASE("recorded tape replays bit-exactly and sampling never touches the recurrence") {
  const VgruParams p = random_params(3, 6, 21);
  RngState rng(99);
  const PosteriorState prev = random_state(3, rng);

  const StepTape tape = step_recorded(p, prev, 2);
  // Interleave posterior sampling between replays; the recurrence only
  // propagates (mu, log_var), so the outcome must be unchanged.
  RngState sampler(1);
  (void)sample(prev, sampler);
  const StepTape replay = step_recorded(p, prev, 2);
  (void)sample(split_state(tape.state_out), sampler);
  CHECK(tape.state_out == replay.state_out);
  CHECK(step(p, prev, 2).state.mu == split_state(replay.state_out).mu);
}

TEST_CASE("new state is a per-coordinate convex combination") {
  RngState rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    const VgruParams p = random_params(3, 5, 100 + trial);
    const PosteriorState prev = random_state(3, rng);
    const auto item = static_cast<std::uint32_t>(rng.next_below(5));
    const StepTape tape = step_recorded(p, prev, item);
    for (std::size_t d = 0; d < tape.state_out.size(); ++d) {
      const double lo = std::min(tape.state_in[d], tape.gates.candidate[d]);
      const double hi = std::max(tape.state_in[d], tape.gates.candidate[d]);
      CHECK(tape.state_out[d] >= lo - 1e-15);
      CHECK(tape.state_out[d] <= hi + 1e-15);
    }
  }
}

TEST_CASE("sample: zero noise returns the mean") {
  PosteriorState s;
  s.mu = {0.3, -0.7};
  s.log_var = 1.3;
  const LatentSample smp = sample_with_eps(s, Vector{0.0, 0.0});
  CHECK(smp.h == s.mu);
}

TEST_CASE("sample: hand arithmetic") {
  PosteriorState s;
  s.mu = {1.0, 2.0};
  s.log_var = std::log(0.25);  // sigma = 0.5
  const LatentSample smp = sample_with_eps(s, Vector{1.0, -1.0});
  CHECK(smp.h[0] == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(smp.h[1] == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("sample: Monte-Carlo moments match the posterior") {
  PosteriorState s;
  s.mu = {0.8, -1.2};
  s.log_var = std::log(0.49);
  RngState rng(3001);
  const std::size_t n = 1'000'000;
  Vector mean(2, 0.0);
  Vector sq(2, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const LatentSample smp = sample(s, rng);
    for (std::size_t d = 0; d < 2; ++d) {
      mean[d] += smp.h[d];
      sq[d] += smp.h[d] * smp.h[d];
    }
  }
  const double variance = std::exp(s.log_var);
  const double se_mean = std::sqrt(variance / static_cast<double>(n));
  const double se_var = variance * std::sqrt(2.0 / static_cast<double>(n - 1));
  for (std::size_t d = 0; d < 2; ++d) {
    mean[d] /= static_cast<double>(n);
    const double var = sq[d] / static_cast<double>(n) - mean[d] * mean[d];
    CHECK(std::abs(mean[d] - s.mu[d]) <= 3.0 * se_mean);
    CHECK(std::abs(var - variance) <= 3.0 * se_var);
  }
}

namespace {

// Monte-Carlo estimate of E_q[log q - log p] with its standard error.
std::pair<double, double> kl_monte_carlo(const PosteriorState& s, std::size_t n,
                                         std::uint64_t seed) {
  RngState rng(seed);
  const auto d = static_cast<double>(s.mu.size());
  const double log_s2 = s.log_var;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const LatentSample smp = sample(s, rng);
    double eps_sq = 0.0;
    double h_sq = 0.0;
    for (std::size_t k = 0; k < smp.h.size(); ++k) {
      eps_sq += smp.eps[k] * smp.eps[k];
      h_sq += smp.h[k] * smp.h[k];
    }
    const double value = -0.5 * d * log_s2 - 0.5 * eps_sq + 0.5 * h_sq;
    sum += value;
    sum_sq += value * value;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sum_sq / static_cast<double>(n) - mean * mean;
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace

TEST_CASE("kl closed form agrees with the Monte-Carlo oracle") {
  PosteriorState a;
  a.mu = {1.0, 0.0};
  a.log_var = 0.0;
  CHECK(kl_to_prior(a) == doctest::Approx(0.5).epsilon(1e-15));
  auto [mc_a, se_a] = kl_monte_carlo(a, 1'000'000, 17);
  CHECK(std::abs(kl_to_prior(a) - mc_a) <= 3.0 * se_a);

  PosteriorState b;
  b.mu = {0.0};
  b.log_var = 1.0;  // variance e
  CHECK(kl_to_prior(b) == doctest::Approx(0.5 * (std::exp(1.0) - 2.0)).epsilon(1e-12));
  CHECK(kl_to_prior(b) == doctest::Approx(0.35914091).epsilon(1e-7));
  auto [mc_b, se_b] = kl_monte_carlo(b, 1'000'000, 18);
  CHECK(std::abs(kl_to_prior(b) - mc_b) <= 3.0 * se_b);
}

TEST_CASE("kl is nonnegative, zero only at the prior") {
  CHECK(kl_to_prior(init_state(4)) == 0.0);
  RngState rng(55);
  for (int trial = 0; trial < 200; ++trial) {
    const PosteriorState s = random_state(1 + rng.next_below(8), rng);
    const double kl = kl_to_prior(s);
    CHECK(kl >= 0.0);
    double mu_sq = 0.0;
    for (double m : s.mu) mu_sq += m * m;
    if (mu_sq > 1e-12 || std::abs(s.log_var) > 1e-12) CHECK(kl > 0.0);
  }
}

TEST_CASE("kl gradient at mu=(1,0), unit variance") {
  // d(kl)/d(mu) = mu and d(kl)/d(log_var) = D/2*(s2 - 1) = 0 at s2 = 1.
  PosteriorState s;
  s.mu = {1.0, 0.0};
  s.log_var = 0.0;
  const double h = 1e-6;
  for (std::size_t d = 0; d < 2; ++d) {
    PosteriorState up = s;
    PosteriorState down = s;
    up.mu[d] += h;
    down.mu[d] -= h;
    const double fd = (kl_to_prior(up) - kl_to_prior(down)) / (2.0 * h);
    CHECK(fd == doctest::Approx(s.mu[d]).epsilon(1e-8));
  }
  PosteriorState up = s;
  PosteriorState down = s;
  up.log_var += h;
  down.log_var -= h;
  const double fd = (kl_to_prior(up) - kl_to_prior(down)) / (2.0 * h);
  CHECK(std::abs(fd) <= 1e-8);
}

TEST_CASE("step_backward: zero upstream gradient yields zero gradients") {
  const VgruParams p = random_params(2, 5, 8);
  RngState rng(44);
  const PosteriorState prev = random_state(2, rng);
  const StepTape tape = step_recorded(p, prev, 3);
  VgruGrads grads = VgruGrads::zeros(2, 5);
  const Vector grad_in = step_backward(tape, Vector(3, 0.0), p, grads);
  for (double g : grad_in) CHECK(g == 0.0);
  for (const Matrix* m : {&grads.in_update, &grads.rec_update, &grads.in_reset,
                          &grads.rec_reset, &grads.in_cand, &grads.rec_cand}) {
    for (double g : m->data) CHECK(g == 0.0);
  }
}

TEST_CASE("step_backward matches central finite differences") {
  const std::size_t latent = 2;
  const std::size_t vocab = 5;
  VgruParams p = random_params(latent, vocab, 9);
  RngState rng(45);
  const PosteriorState prev = random_state(latent, rng);
  const std::uint32_t item = 1;
  const Vector upstream = rng.draw_std_normal(latent + 1);

  // Scalar objective: dot(upstream, state_out).
  auto objective = [&](const VgruParams& params, const Vector& state_in) {
    GateActivations gates;
    const StepResult r = step(params, split_state(state_in), item);
    (void)gates;
    const Vector out = concat_state(r.state);
    double acc = 0.0;
    for (std::size_t d = 0; d < out.size(); ++d) acc += upstream[d] * out[d];
    return acc;
  };

  const StepTape tape = step_recorded(p, prev, item);
  VgruGrads grads = VgruGrads::zeros(latent, vocab);
  const Vector grad_state_in = step_backward(tape, upstream, p, grads);

  const double h = 1e-5;
  const Vector state0 = concat_state(prev);

  // State gradient.
  for (std::size_t d = 0; d < state0.size(); ++d) {
    Vector up = state0;
    Vector down = state0;
    up[d] += h;
    down[d] -= h;
    const double fd = (objective(p, up) - objective(p, down)) / (2.0 * h);
    CHECK(rel_err(grad_state_in[d], fd) <= 1e-6);
  }

  // All six weight matrices.
  const std::vector<std::pair<Matrix VgruParams::*, Matrix VgruGrads::*>> members = {
      {&VgruParams::in_update, &VgruGrads::in_update},
      {&VgruParams::rec_update, &VgruGrads::rec_update},
      {&VgruParams::in_reset, &VgruGrads::in_reset},
      {&VgruParams::rec_reset, &VgruGrads::rec_reset},
      {&VgruParams::in_cand, &VgruGrads::in_cand},
      {&VgruParams::rec_cand, &VgruGrads::rec_cand},
  };
  for (const auto& [pm, gm] : members) {
    Matrix& weights = p.*pm;
    const Matrix& analytic = grads.*gm;
    for (std::size_t i = 0; i < weights.data.size(); ++i) {
      const double saved = weights.data[i];
      weights.data[i] = saved + h;
      const double up = objective(p, state0);
      weights.data[i] = saved - h;
      const double down = objective(p, state0);
      weights.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      CHECK(rel_err(analytic.data[i], fd) <= 1e-6);
    }
  }
}
