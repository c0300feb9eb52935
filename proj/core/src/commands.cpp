#include "sessrec/commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "sessrec/checkpoint.hpp"
#include "sessrec/corpus_io.hpp"
#include "sessrec/error.hpp"

namespace sessrec {

namespace {

int guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

void echo_config(const std::string& command, const ConfigEcho& entries,
                 std::ostream& out = std::cout) {
  out << "# resolved config\n";
  for (const auto& [key, value] : entries) {
    out << command << "." << key << "=" << value << "\n";
  }
}

HeaderMode parse_header_mode(const std::string& text) {
  if (text == "auto") return HeaderMode::auto_detect;
  if (text == "yes") return HeaderMode::yes;
  if (text == "no") return HeaderMode::no;
  throw UsageError("ingest: --header must be auto, yes or no");
}

void require_vocab_match(const ItemVocab& checkpoint_vocab, const ItemVocab& corpus_vocab) {
  if (checkpoint_vocab == corpus_vocab) return;
  std::ostringstream msg;
  msg << "vocabulary mismatch between checkpoint (" << checkpoint_vocab.size()
      << " items) and corpus (" << corpus_vocab.size() << " items)";
  const std::size_t n = std::min(checkpoint_vocab.size(), corpus_vocab.size());
  for (std::uint32_t i = 0; i < n; ++i) {
    if (checkpoint_vocab.raw(i) != corpus_vocab.raw(i)) {
      msg << "; first divergence at index " << i << ": '" << checkpoint_vocab.raw(i)
          << "' vs '" << corpus_vocab.raw(i) << "'";
      break;
    }
  }
  throw DataError(msg.str());
}

EvalConfig make_eval_config(const std::string& mode, std::size_t k,
                            std::size_t mc_samples, std::uint64_t seed) {
  EvalConfig config;
  config.k = k;
  config.mc_samples = mc_samples;
  config.seed = seed;
  if (mode == "mc-mean") {
    config.mode = PredictMode::mc_mean;
  } else if (mode == "mean-state") {
    config.mode = PredictMode::mean_state;
  } else {
    throw UsageError("--mode must be mc-mean or mean-state");
  }
  return config;
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_ingest(const IngestArgs& args) {
  return guarded([&] {
    if (args.delimiter.size() != 1) throw UsageError("ingest: --delimiter must be one character");
    echo_config("ingest", {{"data", args.data_path},
                           {"out", args.out_path},
                           {"delimiter", args.delimiter},
                           {"header", args.header},
                           {"strict", args.strict ? "true" : "false"}});
    IngestOptions options;
    options.delimiter = args.delimiter[0];
    options.header = parse_header_mode(args.header);
    options.strict = args.strict;

    IngestStats stats;
    const Corpus corpus = ingest(args.data_path, options, &stats);
    write_corpus(args.out_path, corpus);
    std::cout << "sessions=" << stats.sessions << " items=" << corpus.vocab.size()
              << " events=" << stats.events
              << " dropped_singletons=" << stats.singleton_sessions_dropped
              << " skipped_rows=" << stats.rows_skipped << "\n";
  });
}

int cmd_split(const SplitArgs& args) {
  return guarded([&] {
    echo_config("split", {{"corpus", args.corpus_path},
                          {"out", args.out_prefix},
                          {"split", args.rule},
                          {"cutoff", std::to_string(args.cutoff)},
                          {"n-test", std::to_string(args.test_count)},
                          {"fraction", fmt_double(args.fraction)},
                          {"seed", std::to_string(args.seed)}});
    Corpus corpus = read_corpus(args.corpus_path);

    SplitRule rule;
    if (args.rule == "by-time") {
      rule.kind = SplitKind::by_time;
    } else if (args.rule == "by-count") {
      rule.kind = SplitKind::by_count;
    } else if (args.rule == "by-hash") {
      rule.kind = SplitKind::by_hash;
    } else {
      throw UsageError("split: --split must be by-time, by-count or by-hash");
    }
    rule.cutoff = args.cutoff;
    rule.test_count = args.test_count;
    rule.fraction = args.fraction;
    rule.seed = args.seed;

    SplitStats stats;
    SplitResult result = split(std::move(corpus.sessions), rule, &stats);

    // Both partitions keep the full shared vocabulary.
    Corpus train{std::move(result.train), corpus.vocab};
    Corpus test{std::move(result.test), corpus.vocab};
    write_corpus(args.out_prefix + ".train", train);
    write_corpus(args.out_prefix + ".test", test);
    std::cout << "train_sessions=" << train.sessions.size()
              << " test_sessions=" << test.sessions.size()
              << " filtered_test_events=" << stats.filtered_test_events
              << " dropped_test_sessions=" << stats.dropped_test_sessions << "\n";
  });
}

int cmd_synth(const SynthArgs& args) {
  return guarded([&] {
    echo_config("synth", {{"out", args.out_path},
                          {"items", std::to_string(args.item_count)},
                          {"sessions", std::to_string(args.session_count)},
                          {"min-len", std::to_string(args.min_len)},
                          {"max-len", std::to_string(args.max_len)},
                          {"kind", args.kind},
                          {"branching", std::to_string(args.branching)},
                          {"seed", std::to_string(args.seed)}});
    SyntheticSpec spec;
    spec.item_count = args.item_count;
    spec.session_count = args.session_count;
    spec.min_len = args.min_len;
    spec.max_len = args.max_len;
    spec.seed = args.seed;
    if (args.kind == "uniform") {
      spec.kind = TransitionKind::uniform;
    } else if (args.kind == "cyclic") {
      spec.kind = TransitionKind::cyclic;
    } else if (args.kind == "markov") {
      spec.kind = TransitionKind::markov;
      RngState rng(derive_stream_seed(args.seed, "transition"));
      spec.transition = random_sparse_transition(args.item_count, args.branching, rng);
    } else {
      throw UsageError("synth: --kind must be uniform, cyclic or markov");
    }

    const Corpus corpus = gen_synthetic(spec);
    write_corpus(args.out_path, corpus);
    std::uint64_t events = 0;
    for (const auto& s : corpus.sessions) events += s.events.size();
    std::cout << "sessions=" << corpus.sessions.size()
              << " items=" << corpus.vocab.size() << " events=" << events << "\n";
  });
}

// ---------------------------------------------------------------------------

namespace {

ConfigEcho train_config_echo(const TrainArgs& args, const TrainConfig& c) {
  return {{"corpus", args.corpus_path},
          {"out", args.out_path},
          {"checkpoint", args.resume_path},
          {"log", args.log_path},
          {"latent-dim", std::to_string(c.latent_dim)},
          {"batch-size", std::to_string(c.batch_size)},
          {"step-size", fmt_double(c.step_size)},
          {"momentum", fmt_double(c.momentum)},
          {"dropout", fmt_double(c.dropout_rate)},
          {"epochs", std::to_string(c.epochs)},
          {"seed", std::to_string(c.seed)},
          {"loss", c.loss == LossKind::cross_entropy ? "cross-entropy" : "top1"},
          {"kl-weight", fmt_double(c.kl_weight)},
          {"gamma-train", std::to_string(c.mc_train_samples)},
          {"bptt-window", std::to_string(c.bptt_window)},
          {"shuffle", c.shuffle_sessions ? "true" : "false"},
          {"eval-corpus", args.eval_corpus},
          {"eval-every", std::to_string(args.eval_every)}};
}

}  // namespace

int cmd_train(const TrainArgs& args) {
  return guarded([&] {
    const Corpus corpus = read_corpus(args.corpus_path);
    const std::string log_path = args.log_path.empty() ? args.out_path + ".log" : args.log_path;

    TrainConfig config = args.config;
    ModelParams model;
    ItemVocab vocab;
    std::uint64_t epochs_done = 0;
    std::uint64_t update_steps = 0;
    RngState rng(config.seed);

    if (!args.resume_path.empty()) {
      Checkpoint ckpt = load_checkpoint(args.resume_path);
      require_vocab_match(ckpt.vocab, corpus.vocab);
      // The checkpoint's hyperparameters are authoritative on resume; only
      // the target epoch count comes from this invocation.
      config = ckpt.config;
      config.epochs = args.config.epochs;
      if (config.epochs < ckpt.epochs_completed) {
        throw UsageError("train: --epochs is below the checkpoint's completed epochs");
      }
      model = std::move(ckpt.model);
      vocab = std::move(ckpt.vocab);
      epochs_done = ckpt.epochs_completed;
      update_steps = ckpt.update_steps;
      rng = RngState::restore(ckpt.rng_seed, ckpt.rng_state);
    } else {
      config.validate();
      vocab = corpus.vocab;
      model = init_model(config.latent_dim, vocab.size(), rng);
    }

    const ConfigEcho echo = train_config_echo(args, config);
    echo_config("train", echo);
    std::ofstream log(log_path, epochs_done == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw DataError("train: cannot open log file " + log_path);
    if (epochs_done == 0) {
      log << "# resolved config\n";
      for (const auto& [k, v] : echo) log << "# train." << k << "=" << v << "\n";
    }

    std::optional<Corpus> validation;
    if (!args.eval_corpus.empty()) {
      validation = read_corpus(args.eval_corpus);
      require_vocab_match(vocab, validation->vocab);
    }

    for (std::uint64_t epoch = epochs_done; epoch < config.epochs; ++epoch) {
      const auto started = std::chrono::steady_clock::now();
      const EpochReport report = train_epoch(model, corpus.sessions, config, rng);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      update_steps += report.batch_steps;

      std::ostringstream line;
      line << "epoch=" << (epoch + 1) << " mean_loss=" << fmt_double(report.mean_total)
           << " mean_data_loss=" << fmt_double(report.mean_data_loss)
           << " mean_kl=" << fmt_double(report.mean_kl)
           << " events=" << report.events
           << " aborted_updates=" << report.aborted_updates
           << " wall_seconds=" << fmt_double(wall);
      std::cout << line.str() << "\n";
      log << line.str() << "\n";

      if (validation && args.eval_every > 0 && (epoch + 1) % args.eval_every == 0) {
        EvalConfig eval_config;
        eval_config.seed = config.seed;
        const EvalReport ev = evaluate(model, validation->sessions, eval_config);
        std::ostringstream eline;
        eline << "eval epoch=" << (epoch + 1)
              << " recall_at_" << eval_config.k << "=" << fmt_double(ev.recall_at_k)
              << " mrr_at_" << eval_config.k << "=" << fmt_double(ev.mrr_at_k)
              << " events=" << ev.events_evaluated;
        std::cout << eline.str() << "\n";
        log << eline.str() << "\n";
      }
    }

    Checkpoint ckpt;
    ckpt.model = std::move(model);
    ckpt.vocab = std::move(vocab);
    ckpt.config = config;
    ckpt.rng_seed = rng.seed();
    ckpt.rng_state = rng.state();
    ckpt.epochs_completed = config.epochs;
    ckpt.update_steps = update_steps;
    save_checkpoint(args.out_path, ckpt);
    std::cout << "checkpoint=" << args.out_path << " epochs=" << ckpt.epochs_completed << "\n";
  });
}

int cmd_evaluate(const EvaluateArgs& args) {
  return guarded([&] {
    echo_config("evaluate", {{"checkpoint", args.checkpoint_path},
                             {"corpus", args.corpus_path},
                             {"out", args.out_prefix},
                             {"mode", args.mode},
                             {"k", std::to_string(args.k)},
                             {"gamma-eval", std::to_string(args.mc_samples)},
                             {"seed", std::to_string(args.seed)}});
    const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
    const Corpus corpus = read_corpus(args.corpus_path);
    require_vocab_match(ckpt.vocab, corpus.vocab);

    const EvalConfig config = make_eval_config(args.mode, args.k, args.mc_samples, args.seed);
    const EvalReport report = evaluate(ckpt.model, corpus.sessions, config);

    std::ostringstream block;
    block << "recall_at_" << config.k << " " << fmt_double(report.recall_at_k) << "\n"
          << "mrr_at_" << config.k << " " << fmt_double(report.mrr_at_k) << "\n"
          << "events_evaluated " << report.events_evaluated << "\n"
          << "events_skipped " << report.events_skipped << "\n";
    std::cout << block.str();

    if (!args.out_prefix.empty()) {
      std::ofstream txt(args.out_prefix + ".txt", std::ios::trunc);
      if (!txt) throw DataError("evaluate: cannot open " + args.out_prefix + ".txt");
      txt << block.str();

      std::ofstream jsonl(args.out_prefix + ".jsonl", std::ios::trunc);
      if (!jsonl) throw DataError("evaluate: cannot open " + args.out_prefix + ".jsonl");
      using nlohmann::json;
      jsonl << json{{"metric", "recall_at_k"}, {"k", config.k}, {"value", report.recall_at_k}}
            << "\n"
            << json{{"metric", "mrr_at_k"}, {"k", config.k}, {"value", report.mrr_at_k}} << "\n"
            << json{{"metric", "events_evaluated"}, {"value", report.events_evaluated}} << "\n"
            << json{{"metric", "events_skipped"}, {"value", report.events_skipped}} << "\n";
    }
  });
}

int cmd_recommend(const RecommendArgs& args) {
  return guarded([&] {
    if (args.items.empty()) throw UsageError("recommend: at least one session item is required");
    std::string joined;
    for (const auto& item : args.items) {
      if (!joined.empty()) joined += ",";
      joined += item;
    }
    echo_config("recommend", {{"checkpoint", args.checkpoint_path},
                              {"items", joined},
                              {"k", std::to_string(args.k)},
                              {"mode", args.mode},
                              {"gamma-eval", std::to_string(args.mc_samples)},
                              {"seed", std::to_string(args.seed)}});
    const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);

    PosteriorState state = init_state(ckpt.model.latent_dim());
    for (const auto& raw : args.items) {
      const auto index = ckpt.vocab.find(raw);
      if (!index) throw DataError("recommend: unknown item id '" + raw + "'");
      state = step(ckpt.model.cell, state, *index).state;
    }

    const EvalConfig config = make_eval_config(args.mode, 1, args.mc_samples, args.seed);
    RngState rng(derive_stream_seed(args.seed, "recommend"));
    const Vector scores = predict_scores(ckpt.model, state, config, rng);

    std::vector<std::uint32_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
    std::stable_sort(order.begin(), order.end(), [&scores](std::uint32_t a, std::uint32_t b) {
      return scores[a] > scores[b];
    });

    const std::size_t k = std::min<std::size_t>(args.k, scores.size());
    for (std::size_t i = 0; i < k; ++i) {
      std::cout << ckpt.vocab.raw(order[i]) << "\t" << fmt_double(scores[order[i]]) << "\n";
    }
  });
}

// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Session-based next-item recommendation with a variational GRU"};
  app.set_config("--config", "", "Key-value config file with one section per subcommand");
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest_cmd = app.add_subcommand("ingest", "Normalize a click-stream text file");
  ingest_cmd->add_option("--data", ingest_args.data_path, "Input text file")->required();
  ingest_cmd->add_option("--out", ingest_args.out_path, "Output corpus file")->required();
  ingest_cmd->add_option("--delimiter", ingest_args.delimiter, "Field delimiter");
  ingest_cmd->add_option("--header", ingest_args.header, "Header row: auto|yes|no");
  ingest_cmd->add_flag("--strict", ingest_args.strict, "Fail on malformed rows");

  SplitArgs split_args;
  auto* split_cmd = app.add_subcommand("split", "Partition a corpus into train/test");
  split_cmd->add_option("--corpus", split_args.corpus_path, "Input corpus")->required();
  split_cmd->add_option("--out", split_args.out_prefix, "Output prefix")->required();
  split_cmd->add_option("--split", split_args.rule, "Rule: by-time|by-count|by-hash");
  split_cmd->add_option("--cutoff", split_args.cutoff, "by-time: epoch-seconds cutoff");
  split_cmd->add_option("--n-test", split_args.test_count, "by-count: test session count");
  split_cmd->add_option("--fraction", split_args.fraction, "by-hash: test fraction");
  split_cmd->add_option("--seed", split_args.seed, "by-hash: hash seed");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth_cmd->add_option("--out", synth_args.out_path, "Output corpus file")->required();
  synth_cmd->add_option("--items", synth_args.item_count, "Item count");
  synth_cmd->add_option("--sessions", synth_args.session_count, "Session count");
  synth_cmd->add_option("--min-len", synth_args.min_len, "Minimum session length");
  synth_cmd->add_option("--max-len", synth_args.max_len, "Maximum session length");
  synth_cmd->add_option("--kind", synth_args.kind, "uniform|cyclic|markov");
  synth_cmd->add_option("--branching", synth_args.branching, "markov: successors per item");
  synth_cmd->add_option("--seed", synth_args.seed, "Generator seed");

  TrainArgs train_args;
  std::string train_loss = "cross-entropy";
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--corpus", train_args.corpus_path, "Training corpus")->required();
  train_cmd->add_option("--out", train_args.out_path, "Checkpoint to write")->required();
  train_cmd->add_option("--checkpoint", train_args.resume_path, "Resume from this checkpoint");
  train_cmd->add_option("--log", train_args.log_path, "Training log (default <out>.log)");
  train_cmd->add_option("--latent-dim", train_args.config.latent_dim, "Latent dimension");
  train_cmd->add_option("--batch-size", train_args.config.batch_size, "Session-parallel lanes");
  train_cmd->add_option("--step-size", train_args.config.step_size,
                        "Adagrad step size {0.005,0.01,0.05,0.1}");
  train_cmd->add_option("--momentum", train_args.config.momentum,
                        "Nesterov momentum {0,0.1,0.2,0.3,0.4}");
  train_cmd->add_option("--dropout", train_args.config.dropout_rate, "Dropout rate on the latent");
  train_cmd->add_option("--epochs", train_args.config.epochs, "Training epochs");
  train_cmd->add_option("--seed", train_args.config.seed, "Deterministic seed");
  train_cmd->add_option("--loss", train_loss, "cross-entropy|top1");
  train_cmd->add_option("--kl-weight", train_args.config.kl_weight, "KL term weight");
  train_cmd->add_option("--gamma-train", train_args.config.mc_train_samples,
                        "Posterior samples per training event");
  train_cmd->add_option("--bptt-window", train_args.config.bptt_window,
                        "Backpropagation truncation window");
  train_cmd->add_flag("--shuffle", train_args.config.shuffle_sessions,
                      "Shuffle session order each epoch");
  train_cmd->add_option("--eval-corpus", train_args.eval_corpus, "Validation corpus");
  train_cmd->add_option("--eval-every", train_args.eval_every,
                        "Validate every N epochs (0 = off)");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "Compute ranking metrics on a corpus");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint_path, "Trained checkpoint")->required();
  eval_cmd->add_option("--corpus", eval_args.corpus_path, "Evaluation corpus")->required();
  eval_cmd->add_option("--out", eval_args.out_prefix, "Report prefix (.txt/.jsonl)");
  eval_cmd->add_option("--mode", eval_args.mode, "mc-mean|mean-state");
  eval_cmd->add_option("--k", eval_args.k, "Ranking cutoff");
  eval_cmd->add_option("--gamma-eval", eval_args.mc_samples, "Posterior samples per prediction");
  eval_cmd->add_option("--seed", eval_args.seed, "Prediction seed");

  RecommendArgs rec_args;
  auto* rec_cmd = app.add_subcommand("recommend", "Top-k items for a session so far");
  rec_cmd->add_option("--checkpoint", rec_args.checkpoint_path, "Trained checkpoint")->required();
  rec_cmd->add_option("items", rec_args.items, "Session item ids, in click order")->required();
  rec_cmd->add_option("--k", rec_args.k, "Number of recommendations");
  rec_cmd->add_option("--mode", rec_args.mode, "mc-mean|mean-state");
  rec_cmd->add_option("--gamma-eval", rec_args.mc_samples, "Posterior samples per prediction");
  rec_cmd->add_option("--seed", rec_args.seed, "Prediction seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (train_loss == "cross-entropy") {
    train_args.config.loss = LossKind::cross_entropy;
  } else if (train_loss == "top1") {
    train_args.config.loss = LossKind::top1;
  } else {
    std::cerr << "usage error: --loss must be cross-entropy or top1\n";
    return 1;
  }

  if (ingest_cmd->parsed()) return cmd_ingest(ingest_args);
  if (split_cmd->parsed()) return cmd_split(split_args);
  if (synth_cmd->parsed()) return cmd_synth(synth_args);
  if (train_cmd->parsed()) return cmd_train(train_args);
  if (eval_cmd->parsed()) return cmd_evaluate(eval_args);
  if (rec_cmd->parsed()) return cmd_recommend(rec_args);
  return 1;
}

}  // namespace sessrec
