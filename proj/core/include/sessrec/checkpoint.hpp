#pragma once

#include <cstdint>
#include <string>

#include "sessrec/data.hpp"
#include "sessrec/model.hpp"
#include "sessrec/trainer.hpp"

namespace sessrec {

// Versioned binary checkpoint (little-endian, layout in docs/formats.md):
// magic "SRECCKPT", u32 version, config block, vocabulary block, the seven
// weight matrices in pinned order with shape headers, Adagrad accumulators,
// momentum velocities, RNG state, epoch/step counters. save -> load -> save
// is byte-identical, and a resumed run reproduces an uninterrupted one.

struct Checkpoint {
  ModelParams model;
  ItemVocab vocab;
  TrainConfig config;
  std::uint64_t rng_seed = 0;
  std::uint64_t rng_state = 0;
  std::uint64_t epochs_completed = 0;
  std::uint64_t update_steps = 0;
};

/// Writes to a temp file then renames, so a partial checkpoint is never
/// left behind at `path`.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

/// Throws DataError on bad magic, version mismatch or truncation.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sessrec
