#include "sessrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "sessrec/error.hpp"

namespace sessrec {

namespace {

bool in_grid(double value, std::initializer_list<double> grid) {
  for (double g : grid) {
    if (std::abs(value - g) < 1e-12) return true;
  }
  return false;
}

}  // namespace

void TrainConfig::validate() const {
  if (latent_dim < 1) throw UsageError("config: latent-dim must be >= 1");
  if (batch_size < 1) throw UsageError("config: batch-size must be >= 1");
  if (!in_grid(step_size, {0.005, 0.01, 0.05, 0.1})) {
    throw UsageError("config: step-size must be one of {0.005, 0.01, 0.05, 0.1}");
  }
  if (!in_grid(momentum, {0.0, 0.1, 0.2, 0.3, 0.4})) {
    throw UsageError("config: momentum must be one of {0, 0.1, 0.2, 0.3, 0.4}");
  }
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw UsageError("config: dropout must be in [0, 1)");
  }
  if (kl_weight < 0.0) throw UsageError("config: kl-weight must be >= 0");
  if (mc_train_samples < 1) throw UsageError("config: gamma-train must be >= 1");
  if (bptt_window < 1) throw UsageError("config: bptt-window must be >= 1");
}

Vector RecordingNoise::normal(std::size_t n) {
  Vector v = inner_.normal(n);
  trace_->normals.push_back(v);
  return v;
}

Vector RecordingNoise::dropout(std::size_t n, double rate) {
  Vector v = inner_.dropout(n, rate);
  trace_->masks.push_back(v);
  return v;
}

Vector ReplayNoise::normal(std::size_t n) {
  if (normal_pos_ >= trace_->normals.size() ||
      trace_->normals[normal_pos_].size() != n) {
    throw NumericError("ReplayNoise: normal draw pattern diverged from recording");
  }
  return trace_->normals[normal_pos_++];
}

Vector ReplayNoise::dropout(std::size_t n, double) {
  if (mask_pos_ >= trace_->masks.size() || trace_->masks[mask_pos_].size() != n) {
    throw NumericError("ReplayNoise: mask draw pattern diverged from recording");
  }
  return trace_->masks[mask_pos_++];
}

namespace {

// Per-step record kept until the window is flushed.
struct WindowStep {
  StepTape tape;
  Vector state_grad;  // direct d(objective)/d(state_out), unscaled sum
};

struct Lane {
  PosteriorState state;
  std::vector<WindowStep> window;
};

struct WindowAccum {
  ModelGrads grads;
  std::size_t events = 0;

  WindowAccum(std::size_t d, std::size_t m) : grads(ModelGrads::zeros(d, m)) {}

  void reset(std::size_t d, std::size_t m) {
    grads = ModelGrads::zeros(d, m);
    events = 0;
  }
};

// Backpropagates every lane's recorded window, scales gradients to the mean
// per event, and applies one optimizer update.
void flush_window(ModelParams& model, std::vector<Lane>& lanes, WindowAccum& acc,
                  const TrainConfig& config, EpochReport& report,
                  const TrainHooks* hooks) {
  if (acc.events == 0) {
    for (auto& lane : lanes) lane.window.clear();
    return;
  }
  const std::size_t state_dim = model.cell.state_dim();
  for (auto& lane : lanes) {
    Vector carry(state_dim, 0.0);
    for (auto it = lane.window.rbegin(); it != lane.window.rend(); ++it) {
      Vector grad_out = it->state_grad;
      for (std::size_t d = 0; d < state_dim; ++d) grad_out[d] += carry[d];
      carry = step_backward(it->tape, grad_out, model.cell, acc.grads.cell);
      if (it->tape.severed) std::fill(carry.begin(), carry.end(), 0.0);
    }
    lane.window.clear();
  }
  acc.grads.scale(1.0 / static_cast<double>(acc.events));

  if (hooks && hooks->grad_sink) {
    auto add = [](Matrix& dst, const Matrix& src) {
      for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
    };
    add(hooks->grad_sink->cell.in_update, acc.grads.cell.in_update);
    add(hooks->grad_sink->cell.rec_update, acc.grads.cell.rec_update);
    add(hooks->grad_sink->cell.in_reset, acc.grads.cell.in_reset);
    add(hooks->grad_sink->cell.rec_reset, acc.grads.cell.rec_reset);
    add(hooks->grad_sink->cell.in_cand, acc.grads.cell.in_cand);
    add(hooks->grad_sink->cell.rec_cand, acc.grads.cell.rec_cand);
    add(hooks->grad_sink->output, acc.grads.output);
  }

  if (!hooks || hooks->update_enabled) {
    if (!apply_update(model, acc.grads, config.step_size, config.momentum)) {
      ++report.aborted_updates;
    }
  }
  acc.reset(model.latent_dim(), model.vocab_size());
}

}  // namespace

EpochReport train_epoch(ModelParams& model, std::span<const Session> sessions,
                        const TrainConfig& config, RngState& rng,
                        const TrainHooks* hooks) {
  config.validate();
  if (sessions.empty()) throw DataError("train_epoch: empty corpus");
  if (model.latent_dim() != config.latent_dim) {
    throw UsageError("train_epoch: model latent dim does not match config");
  }

  const std::size_t latent = model.latent_dim();
  const std::size_t state_dim = model.cell.state_dim();

  std::vector<std::uint32_t> order(sessions.size());
  std::iota(order.begin(), order.end(), 0u);
  if (config.shuffle_sessions) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.next_below(i));
      std::swap(order[i - 1], order[j]);
    }
  }

  RngNoise default_noise(rng);
  NoiseSource& noise = (hooks && hooks->noise) ? *hooks->noise : default_noise;

  Batcher batcher(sessions, config.batch_size, std::move(order));
  if (batcher.batch_size() == 0) {
    throw DataError("train_epoch: no session has at least two events");
  }

  std::vector<Lane> lanes(batcher.batch_size());
  WindowAccum acc(latent, model.vocab_size());
  EpochReport report;
  double sum_data = 0.0;
  double sum_kl = 0.0;
  double sum_total = 0.0;
  const double inv_samples = 1.0 / static_cast<double>(config.mc_train_samples);

  std::vector<std::uint32_t> negatives;
  while (auto batch = batcher.next()) {
    ++report.batch_steps;
    for (std::size_t i = 0; i < lanes.size(); ++i) {
      if (!batch->active[i]) {
        ++report.masked_lane_steps;
        continue;
      }
      Lane& lane = lanes[i];
      if (batch->reset[i]) lane.state = init_state(latent);

      WindowStep step_rec;
      step_rec.tape = step_recorded(model.cell, lane.state, batch->inputs[i]);
      step_rec.tape.severed = batch->reset[i];
      lane.state = split_state(step_rec.tape.state_out);
      const std::uint32_t target = batch->targets[i];

      const double kl = kl_to_prior(lane.state);
      const double sigma2 = std::exp(lane.state.log_var);
      const double sigma = std::exp(0.5 * lane.state.log_var);

      Vector state_grad(state_dim, 0.0);
      for (std::size_t d = 0; d < latent; ++d) {
        state_grad[d] = config.kl_weight * lane.state.mu[d];
      }
      state_grad[latent] =
          config.kl_weight * 0.5 * static_cast<double>(latent) * (sigma2 - 1.0);

      // TOP1 negatives: the other active lanes' targets at this step.
      bool data_skipped = false;
      if (config.loss == LossKind::top1) {
        negatives.clear();
        for (std::size_t j = 0; j < lanes.size(); ++j) {
          if (j == i || !batch->active[j]) continue;
          if (batch->targets[j] == target) continue;
          negatives.push_back(batch->targets[j]);
        }
        if (negatives.empty()) {
          // No usable in-batch negatives; the event still contributes its KL.
          data_skipped = true;
          ++report.skipped_data_events;
        }
      }

      double data_loss = 0.0;
      if (!data_skipped) {
        for (std::size_t g = 0; g < config.mc_train_samples; ++g) {
          const LatentSample smp = sample_with_eps(lane.state, noise.normal(latent));
          Vector mask;
          Vector h = smp.h;
          if (config.dropout_rate > 0.0) {
            mask = noise.dropout(latent, config.dropout_rate);
            for (std::size_t d = 0; d < latent; ++d) h[d] *= mask[d];
          }

          Vector grad_h;
          if (config.loss == LossKind::cross_entropy) {
            const Vector scores = score_all(model.out, h);
            data_loss += cross_entropy(scores, target);
            Vector grad_logits = cross_entropy_logit_grad(scores, target);
            for (double& x : grad_logits) x *= inv_samples;
            grad_h = output_backward(model.out, h, grad_logits, acc.grads.output);
          } else {
            const Vector logits = score_logits(model.out, h);
            data_loss += top1_loss(logits, target, negatives);
            auto grad_logits = top1_logit_grad(logits, target, negatives);
            for (auto& [item, coef] : grad_logits) coef *= inv_samples;
            grad_h = output_backward_sparse(model.out, h, grad_logits, acc.grads.output);
          }

          if (!mask.empty()) {
            for (std::size_t d = 0; d < latent; ++d) grad_h[d] *= mask[d];
          }
          double eps_dot = 0.0;
          for (std::size_t d = 0; d < latent; ++d) {
            state_grad[d] += grad_h[d];
            eps_dot += grad_h[d] * smp.eps[d];
          }
          state_grad[latent] += 0.5 * sigma * eps_dot;
        }
        data_loss *= inv_samples;
      }

      const LossValue loss = elbo_step_loss(kl, data_loss, config.kl_weight);
      sum_data += loss.data_term;
      sum_kl += loss.kl_term;
      sum_total += loss.total;
      ++report.events;
      ++acc.events;

      if (hooks && hooks->event_sink) {
        hooks->event_sink(EventRecord{batch->session_index[i],
                                      batch->event_index[i], loss.data_term,
                                      loss.kl_term});
      }

      step_rec.state_grad = std::move(state_grad);
      lane.window.push_back(std::move(step_rec));
    }
    if (report.batch_steps % config.bptt_window == 0) {
      flush_window(model, lanes, acc, config, report, hooks);
    }
  }
  flush_window(model, lanes, acc, config, report, hooks);

  if (report.events > 0) {
    const double inv = 1.0 / static_cast<double>(report.events);
    report.mean_data_loss = sum_data * inv;
    report.mean_kl = sum_kl * inv;
    report.mean_total = sum_total * inv;
  }
  return report;
}

}  // namespace sessrec
