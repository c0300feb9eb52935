#include "sessrec/checkpoint.hpp"

#include <array>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "binio.hpp"
#include "sessrec/error.hpp"

namespace sessrec {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'R', 'E', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_matrix(std::ostream& out, const Matrix& m) {
  binio::write_u64(out, m.rows);
  binio::write_u64(out, m.cols);
  for (double x : m.data) binio::write_f64(out, x);
}

Matrix read_matrix(std::istream& in, const char* what) {
  const std::uint64_t rows = binio::read_u64(in, what);
  const std::uint64_t cols = binio::read_u64(in, what);
  if (rows == 0 || cols == 0 || rows > (1ULL << 24) || cols > (1ULL << 24)) {
    throw DataError(std::string("checkpoint: implausible matrix shape in ") + what);
  }
  Matrix m(rows, cols);
  for (double& x : m.data) x = binio::read_f64(in, what);
  return m;
}

void write_config(std::ostream& out, const TrainConfig& c) {
  binio::write_u64(out, c.latent_dim);
  binio::write_u64(out, c.batch_size);
  binio::write_f64(out, c.step_size);
  binio::write_f64(out, c.momentum);
  binio::write_f64(out, c.dropout_rate);
  binio::write_u64(out, c.epochs);
  binio::write_u64(out, c.seed);
  binio::write_u32(out, c.loss == LossKind::cross_entropy ? 0 : 1);
  binio::write_f64(out, c.kl_weight);
  binio::write_u64(out, c.mc_train_samples);
  binio::write_u64(out, c.bptt_window);
  binio::write_u32(out, c.shuffle_sessions ? 1 : 0);
}

TrainConfig read_config(std::istream& in) {
  TrainConfig c;
  c.latent_dim = binio::read_u64(in, "config");
  c.batch_size = binio::read_u64(in, "config");
  c.step_size = binio::read_f64(in, "config");
  c.momentum = binio::read_f64(in, "config");
  c.dropout_rate = binio::read_f64(in, "config");
  c.epochs = binio::read_u64(in, "config");
  c.seed = binio::read_u64(in, "config");
  const std::uint32_t loss = binio::read_u32(in, "config");
  if (loss > 1) throw DataError("checkpoint: unknown loss kind");
  c.loss = loss == 0 ? LossKind::cross_entropy : LossKind::top1;
  c.kl_weight = binio::read_f64(in, "config");
  c.mc_train_samples = binio::read_u64(in, "config");
  c.bptt_window = binio::read_u64(in, "config");
  c.shuffle_sessions = binio::read_u32(in, "config") != 0;
  return c;
}

template <typename Bundle, typename Fn>
void for_each_weight(Bundle& b, Fn&& fn) {
  fn(b.cell.in_update);
  fn(b.cell.rec_update);
  fn(b.cell.in_reset);
  fn(b.cell.rec_reset);
  fn(b.cell.in_cand);
  fn(b.cell.rec_cand);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("save_checkpoint: cannot open " + tmp);

    binio::write_bytes(out, kMagic.data(), kMagic.size());
    binio::write_u32(out, kVersion);
    write_config(out, checkpoint.config);

    binio::write_varint(out, checkpoint.vocab.size());
    for (std::uint32_t i = 0; i < checkpoint.vocab.size(); ++i) {
      binio::write_string(out, checkpoint.vocab.raw(i));
    }

    const ModelParams& m = checkpoint.model;
    write_matrix(out, m.cell.in_update);
    write_matrix(out, m.cell.rec_update);
    write_matrix(out, m.cell.in_reset);
    write_matrix(out, m.cell.rec_reset);
    write_matrix(out, m.cell.in_cand);
    write_matrix(out, m.cell.rec_cand);
    write_matrix(out, m.out.weights);
    for_each_weight(m.accum, [&out](const Matrix& w) { write_matrix(out, w); });
    write_matrix(out, m.accum.output);
    for_each_weight(m.velocity, [&out](const Matrix& w) { write_matrix(out, w); });
    write_matrix(out, m.velocity.output);

    binio::write_u64(out, checkpoint.rng_seed);
    binio::write_u64(out, checkpoint.rng_state);
    binio::write_u64(out, checkpoint.epochs_completed);
    binio::write_u64(out, checkpoint.update_steps);
    if (!out) throw DataError("save_checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("load_checkpoint: cannot open " + path);

  std::array<char, 8> magic{};
  binio::read_bytes(in, magic.data(), magic.size(), "checkpoint magic");
  if (std::memcmp(magic.data(), kMagic.data(), magic.size()) != 0) {
    throw DataError("load_checkpoint: " + path + " is not a checkpoint (bad magic)");
  }
  const std::uint32_t version = binio::read_u32(in, "checkpoint version");
  if (version != kVersion) {
    throw DataError("load_checkpoint: unsupported version " + std::to_string(version));
  }

  Checkpoint ckpt;
  ckpt.config = read_config(in);

  const std::uint64_t vocab_size = binio::read_varint(in, "vocabulary size");
  for (std::uint64_t i = 0; i < vocab_size; ++i) {
    const std::string raw = binio::read_string(in, "vocabulary entry");
    if (ckpt.vocab.add(raw) != i) {
      throw DataError("load_checkpoint: duplicate vocabulary entry '" + raw + "'");
    }
  }

  ModelParams& m = ckpt.model;
  m.cell.latent_dim = ckpt.config.latent_dim;
  m.cell.vocab_size = vocab_size;
  m.cell.in_update = read_matrix(in, "in_update");
  m.cell.rec_update = read_matrix(in, "rec_update");
  m.cell.in_reset = read_matrix(in, "in_reset");
  m.cell.rec_reset = read_matrix(in, "rec_reset");
  m.cell.in_cand = read_matrix(in, "in_cand");
  m.cell.rec_cand = read_matrix(in, "rec_cand");
  m.out.weights = read_matrix(in, "output weights");

  const std::size_t s = ckpt.config.latent_dim + 1;
  if (m.cell.in_update.rows != s || m.cell.in_update.cols != vocab_size ||
      m.cell.rec_update.rows != s || m.cell.rec_update.cols != s ||
      m.out.weights.rows != vocab_size || m.out.weights.cols != ckpt.config.latent_dim) {
    throw DataError("load_checkpoint: weight shapes inconsistent with config");
  }

  for_each_weight(m.accum, [&in](Matrix& w) { w = read_matrix(in, "accumulator"); });
  m.accum.output = read_matrix(in, "accumulator");
  for_each_weight(m.velocity, [&in](Matrix& w) { w = read_matrix(in, "velocity"); });
  m.velocity.output = read_matrix(in, "velocity");

  ckpt.rng_seed = binio::read_u64(in, "rng seed");
  ckpt.rng_state = binio::read_u64(in, "rng state");
  ckpt.epochs_completed = binio::read_u64(in, "epoch counter");
  ckpt.update_steps = binio::read_u64(in, "step counter");
  return ckpt;
}

}  // namespace sessrec
