#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "sessrec/error.hpp"
#include "sessrec/objective.hpp"
#include "sessrec/rng.hpp"

using namespace sessrec;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

OutputParams random_output(std::size_t latent, std::size_t vocab, std::uint64_t seed) {
  RngState rng(seed);
  OutputParams out = OutputParams::zeros(latent, vocab);
  for (double& x : out.weights.data) x = rng.draw_std_normal(1)[0] * 0.7;
  return out;
}

}  // namespace

TEST_CASE("score_all: zero weights or zero latent give 0.5 everywhere") {
  const OutputParams zero = OutputParams::zeros(3, 4);
  const Vector h{0.4, -0.2, 1.0};
  for (double s : score_all(zero, h)) CHECK(s == 0.5);

  const OutputParams out = random_output(3, 4, 2);
  for (double s : score_all(out, Vector{0.0, 0.0, 0.0})) CHECK(s == 0.5);
}

TEST_CASE("score_all: scalar sigmoid oracle") {
  OutputParams out = OutputParams::zeros(2, 3);
  out.weights(0, 0) = 1.0;  // rows (1,0), (0,1), (-1,0)
  out.weights(1, 1) = 1.0;
  out.weights(2, 0) = -1.0;
  const Vector scores = score_all(out, Vector{2.0, 0.0});
  CHECK(scores[0] == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  CHECK(scores[0] == doctest::Approx(0.8807970780).epsilon(1e-9));
  CHECK(scores[1] == 0.5);
  CHECK(scores[2] == doctest::Approx(0.1192029220).epsilon(1e-9));
}

TEST_CASE("score_all stays inside (0,1) and ranking is deterministic") {
  const OutputParams out = random_output(4, 20, 3);
  RngState rng(4);
  const Vector h = rng.draw_std_normal(4);
  const Vector a = score_all(out, h);
  const Vector b = score_all(out, h);
  CHECK(a == b);  // identical (h, weights) -> identical scores, hence argsort
  for (double s : a) {
    CHECK(s > 0.0);
    CHECK(s < 1.0);
  }
}

TEST_CASE("cross_entropy: uniform scores") {
  const double loss = cross_entropy(Vector{0.5, 0.5}, 0);
  CHECK(loss == doctest::Approx(-std::log(0.5) * 2.0).epsilon(1e-15));
  CHECK(loss == doctest::Approx(1.3862943611).epsilon(1e-9));
}

TEST_CASE("cross_entropy: perfect prediction limit is 0 and loss is finite at saturation") {
  const double loss = cross_entropy(Vector{1.0, 0.0, 0.0}, 0);
  CHECK(loss >= 0.0);
  CHECK(loss <= 1e-10);  // clamped at 1e-12 from the boundaries
  CHECK(std::isfinite(cross_entropy(Vector{0.0, 1.0}, 0)));
}

TEST_CASE("cross_entropy: hand arithmetic oracle") {
  // -log 0.9 - log 0.8 - log 0.7
  const double expect = -std::log(0.9) - std::log(0.8) - std::log(0.7);
  CHECK(cross_entropy(Vector{0.9, 0.2, 0.3}, 0) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(cross_entropy(Vector{0.9, 0.2, 0.3}, 0) == doctest::Approx(0.6851790109).epsilon(1e-9));
}

TEST_CASE("cross_entropy is nonnegative") {
  RngState rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + rng.next_below(8);
    Vector scores(m);
    for (double& s : scores) s = rng.next_unit();
    CHECK(cross_entropy(scores, static_cast<std::uint32_t>(rng.next_below(m))) >= 0.0);
  }
}

TEST_CASE("top1: tied scores") {
  const Vector logits{0.0, 0.0};
  const std::vector<std::uint32_t> negatives{1};
  CHECK(top1_loss(logits, 0, negatives) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("top1: saturation behavior") {
  // Negative logit -50 against target 0: sigmoid(-50) + sigmoid(2500) ~ 1.
  const Vector logits{0.0, -50.0};
  const std::vector<std::uint32_t> negatives{1};
  CHECK(top1_loss(logits, 0, negatives) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("top1: scalar sigmoid oracle") {
  auto s = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const Vector logits{1.0, 0.0, -1.0};
  const std::vector<std::uint32_t> negatives{1, 2};
  const double expect = 0.5 * ((s(-1.0) + s(0.0)) + (s(-2.0) + s(1.0)));
  CHECK(top1_loss(logits, 0, negatives) == doctest::Approx(expect).epsilon(1e-15));
  CHECK(top1_loss(logits, 0, negatives) == doctest::Approx(0.8096014616).epsilon(1e-9));
}

TEST_CASE("top1: empty negatives and target-in-negatives are fatal") {
  const Vector logits{1.0, 0.0};
  CHECK_THROWS_AS(top1_loss(logits, 0, std::vector<std::uint32_t>{}), std::invalid_argument);
  CHECK_THROWS_AS(top1_loss(logits, 0, std::vector<std::uint32_t>{0}), std::invalid_argument);
}

TEST_CASE("top1 ranking term is invariant to logit translation") {
  RngState rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 3 + rng.next_below(6);
    Vector logits = rng.draw_std_normal(m);
    std::vector<std::uint32_t> negatives;
    for (std::uint32_t j = 1; j < m; ++j) negatives.push_back(j);
    const double shift = rng.draw_std_normal(1)[0] * 5.0;
    Vector shifted = logits;
    for (double& x : shifted) x += shift;
    const auto base = top1_loss_parts(logits, 0, negatives);
    const auto moved = top1_loss_parts(shifted, 0, negatives);
    CHECK(rel_err(base.first, moved.first) <= 1e-9);
  }
}

TEST_CASE("elbo_step_loss assembles totals and rejects negative kl") {
  const LossValue a = elbo_step_loss(0.0, 1.386, 1.0);
  CHECK(a.total == doctest::Approx(1.386));
  const LossValue b = elbo_step_loss(0.5, 0.0, 1.0);
  CHECK(b.total == doctest::Approx(0.5));
  const LossValue c = elbo_step_loss(0.5, 0.68557, 1.0);
  CHECK(c.total == doctest::Approx(1.18557));
  CHECK(c.data_term == doctest::Approx(0.68557));
  CHECK(c.kl_term == doctest::Approx(0.5));
  const LossValue d = elbo_step_loss(0.5, 1.0, 0.25);
  CHECK(d.total == doctest::Approx(1.125));
  CHECK_THROWS_AS(elbo_step_loss(-0.1, 1.0, 1.0), NumericError);
}

TEST_CASE("cross-entropy-through-scores gradient matches finite differences") {
  const std::size_t latent = 4;
  const std::size_t vocab = 10;
  OutputParams out = random_output(latent, vocab, 10);
  RngState rng(11);
  Vector h = rng.draw_std_normal(latent);
  const std::uint32_t target = 3;

  auto loss_at = [&]() { return cross_entropy(score_all(out, h), target); };

  const Vector grad_logits = cross_entropy_logit_grad(score_all(out, h), target);
  Matrix grad_weights(vocab, latent);
  const Vector grad_h = output_backward(out, h, grad_logits, grad_weights);

  const double step = 1e-5;
  for (std::size_t d = 0; d < latent; ++d) {
    const double saved = h[d];
    h[d] = saved + step;
    const double up = loss_at();
    h[d] = saved - step;
    const double down = loss_at();
    h[d] = saved;
    CHECK(rel_err(grad_h[d], (up - down) / (2.0 * step)) <= 1e-6);
  }
  for (std::size_t i = 0; i < out.weights.data.size(); ++i) {
    const double saved = out.weights.data[i];
    out.weights.data[i] = saved + step;
    const double up = loss_at();
    out.weights.data[i] = saved - step;
    const double down = loss_at();
    out.weights.data[i] = saved;
    CHECK(rel_err(grad_weights.data[i], (up - down) / (2.0 * step)) <= 1e-6);
  }
}

TEST_CASE("top1 gradient matches finite differences") {
  const std::size_t latent = 3;
  const std::size_t vocab = 8;
  OutputParams out = random_output(latent, vocab, 12);
  RngState rng(13);
  Vector h = rng.draw_std_normal(latent);
  const std::uint32_t target = 2;
  const std::vector<std::uint32_t> negatives{0, 5, 7};

  auto loss_at = [&]() { return top1_loss(score_logits(out, h), target, negatives); };

  const auto grad_logits = top1_logit_grad(score_logits(out, h), target, negatives);
  Matrix grad_weights(vocab, latent);
  const Vector grad_h = output_backward_sparse(out, h, grad_logits, grad_weights);

  const double step = 1e-5;
  for (std::size_t d = 0; d < latent; ++d) {
    const double saved = h[d];
    h[d] = saved + step;
    const double up = loss_at();
    h[d] = saved - step;
    const double down = loss_at();
    h[d] = saved;
    CHECK(rel_err(grad_h[d], (up - down) / (2.0 * step)) <= 1e-6);
  }
  for (std::size_t i = 0; i < out.weights.data.size(); ++i) {
    const double saved = out.weights.data[i];
    out.weights.data[i] = saved + step;
    const double up = loss_at();
    out.weights.data[i] = saved - step;
    const double down = loss_at();
    out.weights.data[i] = saved;
    const double fd = (up - down) / (2.0 * step);
    if (fd == 0.0 && grad_weights.data[i] == 0.0) continue;
    CHECK(rel_err(grad_weights.data[i], fd) <= 1e-6);
  }
}
