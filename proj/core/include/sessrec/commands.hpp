#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sessrec/eval.hpp"
#include "sessrec/trainer.hpp"

namespace sessrec {

// Subcommand implementations behind the `sessrec` executable. Every command
// is a pure function of its input files and resolved arguments: repeated
// invocation yields identical outputs, and input files are never mutated.
// Each returns a process exit code: 0 success, 1 usage error, 2 data error,
// 3 numeric or internal failure. The resolved configuration is echoed to
// stdout before any work starts.

struct IngestArgs {
  std::string data_path;
  std::string out_path;
  std::string delimiter = ",";
  std::string header = "auto";  // auto | yes | no
  bool strict = false;
};

struct SplitArgs {
  std::string corpus_path;
  std::string out_prefix;  // writes <prefix>.train and <prefix>.test
  std::string rule = "by-count";  // by-time | by-count | by-hash
  std::int64_t cutoff = 0;
  std::uint64_t test_count = 1;
  double fraction = 0.1;
  std::uint64_t seed = 1;
};

struct SynthArgs {
  std::string out_path;
  std::uint64_t item_count = 50;
  std::uint64_t session_count = 200;
  std::uint64_t min_len = 5;
  std::uint64_t max_len = 15;
  std::string kind = "cyclic";  // uniform | cyclic | markov
  std::uint64_t branching = 3;  // markov successors per item
  std::uint64_t seed = 1;
};

struct TrainArgs {
  std::string corpus_path;
  std::string out_path;       // checkpoint to write
  std::string resume_path;    // optional checkpoint to resume from
  std::string log_path;       // default: out_path + ".log"
  std::string eval_corpus;    // optional periodic validation corpus
  std::uint64_t eval_every = 0;  // epochs between validations, 0 = off
  TrainConfig config;
};

struct EvaluateArgs {
  std::string checkpoint_path;
  std::string corpus_path;
  std::string out_prefix;  // writes <prefix>.txt and <prefix>.jsonl; empty = stdout only
  std::string mode = "mc-mean";  // mc-mean | mean-state
  std::size_t k = 20;
  std::size_t mc_samples = 10;
  std::uint64_t seed = 1;
};

struct RecommendArgs {
  std::string checkpoint_path;
  std::vector<std::string> items;  // session so far, raw item ids
  std::size_t k = 20;
  std::string mode = "mc-mean";
  std::size_t mc_samples = 10;
  std::uint64_t seed = 1;
};

int cmd_ingest(const IngestArgs& args);
int cmd_split(const SplitArgs& args);
int cmd_synth(const SynthArgs& args);
int cmd_train(const TrainArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_recommend(const RecommendArgs& args);

/// Full argv-level entry point (argument parsing included).
int run_cli(int argc, const char* const* argv);

}  // namespace sessrec
