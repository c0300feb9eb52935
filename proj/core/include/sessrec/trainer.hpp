#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sessrec/data.hpp"
#include "sessrec/model.hpp"

namespace sessrec {

enum class LossKind { cross_entropy, top1 };

struct TrainConfig {
  std::size_t latent_dim = 100;
  std::size_t batch_size = 50;
  double step_size = 0.05;     // one of {0.005, 0.01, 0.05, 0.1}
  double momentum = 0.0;       // one of {0, 0.1, 0.2, 0.3, 0.4}
  double dropout_rate = 0.5;   // on the sampled latent, before the output layer
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  LossKind loss = LossKind::cross_entropy;
  double kl_weight = 1.0;
  std::size_t mc_train_samples = 1;  // reparameterized samples per event
  std::size_t bptt_window = 1;       // gradient truncation depth, in steps
  bool shuffle_sessions = false;     // per-epoch session order shuffle

  /// Throws UsageError on any out-of-range hyperparameter.
  void validate() const;
};

/// Reparameterization noise and dropout masks consumed by one training
/// forward pass. Swappable so a pass can be recorded and replayed exactly
/// (the objective is deterministic given the noise, which makes
/// finite-difference gradient checks exact).
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual Vector normal(std::size_t n) = 0;
  virtual Vector dropout(std::size_t n, double rate) = 0;
};

/// Live stream backed by an RngState.
class RngNoise : public NoiseSource {
 public:
  explicit RngNoise(RngState& rng) : rng_(&rng) {}
  Vector normal(std::size_t n) override { return rng_->draw_std_normal(n); }
  Vector dropout(std::size_t n, double rate) override {
    return dropout_mask(n, rate, *rng_);
  }

 private:
  RngState* rng_;
};

struct NoiseTrace {
  std::vector<Vector> normals;
  std::vector<Vector> masks;
};

/// Live stream that also appends every draw to a trace.
class RecordingNoise : public NoiseSource {
 public:
  RecordingNoise(RngState& rng, NoiseTrace& trace) : inner_(rng), trace_(&trace) {}
  Vector normal(std::size_t n) override;
  Vector dropout(std::size_t n, double rate) override;

 private:
  RngNoise inner_;
  NoiseTrace* trace_;
};

/// Replays a recorded trace; throws NumericError if the consumption pattern
/// diverges from the recording.
class ReplayNoise : public NoiseSource {
 public:
  explicit ReplayNoise(const NoiseTrace& trace) : trace_(&trace) {}
  Vector normal(std::size_t n) override;
  Vector dropout(std::size_t n, double rate) override;

 private:
  const NoiseTrace* trace_;
  std::size_t normal_pos_ = 0;
  std::size_t mask_pos_ = 0;
};

/// eps = 0 and keep-everything masks: the forward pass becomes a
/// deterministic function of the recurrent state.
class ZeroNoise : public NoiseSource {
 public:
  Vector normal(std::size_t n) override { return Vector(n, 0.0); }
  Vector dropout(std::size_t n, double) override { return Vector(n, 1.0); }
};

struct EpochReport {
  double mean_data_loss = 0.0;
  double mean_kl = 0.0;
  double mean_total = 0.0;  // data + kl_weight * kl, averaged per event
  std::uint64_t batch_steps = 0;
  std::uint64_t events = 0;
  std::uint64_t masked_lane_steps = 0;
  std::uint64_t aborted_updates = 0;      // non-finite gradients
  std::uint64_t skipped_data_events = 0;  // top1 events with no negatives
};

/// One per (lane, step) training event, exposed for instrumentation.
struct EventRecord {
  std::uint32_t session_index = 0;
  std::uint32_t event_index = 0;  // input-event position within the session
  double data_loss = 0.0;
  double kl = 0.0;
};

/// Test and instrumentation hooks; all optional.
struct TrainHooks {
  NoiseSource* noise = nullptr;  // replaces the config-seeded stream
  std::function<void(const EventRecord&)> event_sink;
  bool update_enabled = true;    // false: full forward/backward, no weight update
  ModelGrads* grad_sink = nullptr;  // accumulates each window's (scaled) gradients
};

/// Runs one epoch of session-parallel training over the corpus. The model's
/// weights and optimizer state advance in place; rng advances
/// deterministically (session shuffle, reparameterization draws, dropout).
EpochReport train_epoch(ModelParams& model, std::span<const Session> sessions,
                        const TrainConfig& config, RngState& rng,
                        const TrainHooks* hooks = nullptr);

}  // namespace sessrec
