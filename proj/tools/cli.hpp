// Copyright 2026 The vtlattice Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Subcommands of the `vtl` tool. Exit status: 0 on success, 1 on data or
// validation errors, 2 on usage errors.

#pragma once

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "manifest.hpp"
#include "vtl/corpus_io.hpp"
#include "vtl/evalkit.hpp"
#include "vtl/features.hpp"
#include "vtl/latticernn.hpp"
#include "vtl/posterior.hpp"
#include "vtl/scores.hpp"
#include "vtl/synthgen.hpp"

namespace vtl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": invalid JSON: " + e.what());
  }
}

inline std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
  return buf;
}

// JSON has no infinity; thresholds at the +inf sentinel are stored as "inf".
inline nlohmann::ordered_json threshold_to_json(double t) {
  if (std::isfinite(t)) return t;
  return format_double(t);
}

inline double threshold_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string())
    if (auto v = parse_double(j.get<std::string>())) return *v;
  throw FormatError("summary: 'threshold' must be a number or \"inf\"");
}

inline std::string default_vocab(const std::string& corpus) {
  return (std::filesystem::path(corpus).parent_path() / "vocab.tsv").string();
}

inline std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

inline void write_scores_atomic(const std::string& path, const std::vector<ScoredUtterance>& s) {
  std::ostringstream out;
  write_scores(out, s);
  write_atomic(path, out.str());
}

// Validates one lattice against the vocabulary, naming it in any error.
inline void check_lattice(const Lattice& lat, const Vocabulary& vocab) {
  try {
    const Topology checked(lat);
    check_words(lat, vocab);
  } catch (const DataError& e) {
    throw DataError("utterance '" + lat.utterance_id + "': " + e.what());
  }
}

inline void print_rates(std::ostream& out, const std::vector<ScoredUtterance>& scores,
                        double threshold) {
  bool labeled = !scores.empty();
  for (const auto& s : scores) labeled &= s.label.has_value();
  if (!labeled) return;
  const Rates r = apply_threshold(scores, threshold);
  out << "p_miss " << percent(r.p_miss) << "  p_fa " << percent(r.p_fa) << " at threshold "
      << format_double(threshold) << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct GenOptions {
  std::string config, out_dir;
  std::optional<std::uint64_t> seed;
};

inline void run_gen(const GenOptions& o, std::ostream& out) {
  GenConfig cfg;
  RunManifest m("gen");
  if (!o.config.empty()) {
    cfg = gen_config_from_json(detail::read_json(o.config));
    m.add_input("config", o.config);
  }
  if (o.seed) cfg.seed = *o.seed;
  cfg.check();
  const auto corpus = generate(cfg);
  std::filesystem::create_directories(o.out_dir);
  const std::filesystem::path dir(o.out_dir);
  auto write_split = [&](const char* name, const std::vector<Lattice>& split) {
    std::ostringstream s;
    write_corpus(s, split);
    const std::string path = (dir / name).string();
    write_atomic(path, s.str());
    m.add_output(name, path);
  };
  write_split("train.jsonl", corpus.split.train);
  write_split("dev.jsonl", corpus.split.dev);
  write_split("eval.jsonl", corpus.split.eval);
  std::ostringstream v;
  write_vocabulary(v, corpus.vocab);
  write_atomic((dir / "vocab.tsv").string(), v.str());
  m.add_output("vocab.tsv", (dir / "vocab.tsv").string());
  m.config() = to_json(cfg);
  m.set_seed(cfg.seed);
  m.write((dir / "gen-manifest.json").string());

  const auto st = corpus_stats(corpus.split);
  auto row = [&](const char* name, const SplitStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-5s %6zu lattices (%zu positive, %zu negative), %.1f arcs, %.1f frames\n",
                  name, s.lattices, s.positives, s.negatives, s.mean_arcs, s.mean_frames);
    out << buf;
  };
  row("train", st.train);
  row("dev", st.dev);
  row("eval", st.eval);
}

struct TrainAeOptions {
  std::string lexicon, out;
  std::uint64_t seed = 1;
  int epochs = AutoencoderConfig{}.epochs;
  double learning_rate = AutoencoderConfig{}.learning_rate;
};

inline void run_train_ae(const TrainAeOptions& o, std::ostream& out) {
  const Vocabulary vocab = read_vocabulary(o.lexicon);
  const AutoencoderConfig cfg{o.seed, o.epochs, o.learning_rate};
  const auto trained = train_autoencoder(vocab, cfg);
  write_atomic(o.out, to_json(trained.params).dump(2) + "\n");
  RunManifest m("train-ae");
  m.set_seed(o.seed);
  m.config() = {{"lexicon", o.lexicon}, {"seed", o.seed}, {"epochs", o.epochs},
                {"learning_rate", o.learning_rate}, {"out", o.out}};
  m.add_input("lexicon", o.lexicon);
  m.add_output("autoencoder", o.out);
  m.write(detail::manifest_path(o.out));
  out << "reconstruction loss " << format_double(trained.loss_history.back()) << " after "
      << trained.loss_history.size() - 1 << " steps\n";
}

struct StatsOptions {
  std::string corpus, ae, vocab, trigger = "hey siri", out;
};

inline void run_stats(const StatsOptions& o, std::ostream& out) {
  const std::string vocab_path = o.vocab.empty() ? detail::default_vocab(o.corpus) : o.vocab;
  const Vocabulary vocab = read_vocabulary(vocab_path);
  const auto ae = autoencoder_from_json(detail::read_json(o.ae));
  const auto trigger = TriggerPhrase::parse(vocab, o.trigger);
  const auto corpus = read_corpus(o.corpus);
  const FeatureExtractor fx(vocab, ae, trigger);
  std::vector<ArcFeatures> feats;
  for (const auto& lat : corpus) {
    detail::check_lattice(lat, vocab);
    feats.push_back(fx.extract(lat));
  }
  const NormStats stats = fit_norm_stats(feats);
  write_atomic(o.out, to_json(stats).dump(2) + "\n");
  RunManifest m("stats");
  m.config() = {{"corpus", o.corpus}, {"ae", o.ae}, {"vocab", vocab_path},
                {"trigger", o.trigger}, {"out", o.out}};
  m.add_input("corpus", o.corpus);
  m.add_input("autoencoder", o.ae);
  m.add_input("vocabulary", vocab_path);
  m.add_output("norm_stats", o.out);
  m.write(detail::manifest_path(o.out));
  const auto s = corpus_stats(corpus);
  out << s.lattices << " lattices (" << s.positives << " positive, " << s.negatives
      << " negative), mean " << format_double(s.mean_arcs) << " arcs\n";
}

struct TrainOptions {
  std::string corpus, ae, vocab, stats, trigger = "hey siri", out;
  std::string arch = "bidir";
  int state_dim = 15, hidden = 15;
  int epochs = 40, batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  bool quiet = false;
};

inline void run_train(const TrainOptions& o, std::ostream& out) {
  const std::string vocab_path = o.vocab.empty() ? detail::default_vocab(o.corpus) : o.vocab;
  const Vocabulary vocab = read_vocabulary(vocab_path);
  const auto ae = autoencoder_from_json(detail::read_json(o.ae));
  const auto trigger = TriggerPhrase::parse(vocab, o.trigger);
  const auto corpus = read_corpus(o.corpus);
  for (const auto& lat : corpus) detail::check_lattice(lat, vocab);
  std::optional<NormStats> norm;
  if (!o.stats.empty()) norm = norm_stats_from_json(detail::read_json(o.stats));

  TrainConfig cfg;
  cfg.arch = parse_arch(o.arch);
  cfg.dims = {kFeatureDim, o.state_dim, o.hidden};
  cfg.learning_rate = o.learning_rate;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.seed = o.seed;

  auto progress = [&](int epoch, double loss) {
    if (!o.quiet) out << "epoch " << epoch + 1 << " loss " << format_double(loss) << '\n';
  };
  const auto trained = train_model(corpus, vocab, ae, trigger, cfg, norm, progress);
  write_atomic(o.out, to_json(trained.model).dump(1) + "\n");

  RunManifest m("train");
  m.set_seed(o.seed);
  m.config() = {{"corpus", o.corpus}, {"ae", o.ae}, {"vocab", vocab_path}, {"stats", o.stats},
                {"trigger", o.trigger}, {"arch", o.arch}, {"state_dim", o.state_dim},
                {"hidden", o.hidden}, {"epochs", o.epochs}, {"batch_size", o.batch_size},
                {"learning_rate", o.learning_rate}, {"seed", o.seed}, {"out", o.out}};
  m.add_input("corpus", o.corpus);
  m.add_input("autoencoder", o.ae);
  m.add_input("vocabulary", vocab_path);
  if (!o.stats.empty()) m.add_input("norm_stats", o.stats);
  m.add_output("model", o.out);
  m.write(detail::manifest_path(o.out));
  out << arch_name(cfg.arch) << " model with " << trained.model.network.size()
      << " parameters, training loss " << format_double(trained.log.initial_loss) << " -> "
      << format_double(trained.log.epoch_loss.empty() ? trained.log.initial_loss
                                                      : trained.log.epoch_loss.back())
      << '\n';
}

struct ScoreOptions {
  std::string model, corpus, out;
  int jobs = 1;
};

inline void run_score(const ScoreOptions& o, std::ostream& out) {
  const ModelParams model = model_from_json(detail::read_json(o.model));
  const auto corpus = read_corpus(o.corpus);
  const auto scores = score_corpus(corpus, model, o.jobs);
  detail::write_scores_atomic(o.out, scores);
  RunManifest m("score");
  m.config() = {{"model", o.model}, {"corpus", o.corpus}, {"out", o.out}};
  m.add_input("model", o.model);
  m.add_input("corpus", o.corpus);
  m.add_output("scores", o.out);
  m.write(detail::manifest_path(o.out));
  out << "scored " << scores.size() << " lattices\n";
}

struct LatticeScoreOptions {
  std::string corpus, vocab, trigger = "hey siri", out;
};

// Shared body of `posterior` and `baseline`, which score each lattice
// directly from its arcs.
template <typename Scorer>
void run_lattice_scorer(const char* name, const LatticeScoreOptions& o, Scorer&& scorer,
                        double report_threshold, std::ostream& out) {
  const std::string vocab_path = o.vocab.empty() ? detail::default_vocab(o.corpus) : o.vocab;
  const Vocabulary vocab = read_vocabulary(vocab_path);
  const auto trigger = TriggerPhrase::parse(vocab, o.trigger);
  const auto corpus = read_corpus(o.corpus);
  std::vector<ScoredUtterance> scores;
  scores.reserve(corpus.size());
  for (const auto& lat : corpus) {
    try {
      scores.push_back({lat.utterance_id, scorer(Topology(lat), trigger), lat.label});
    } catch (const DataError& e) {
      throw DataError("utterance '" + lat.utterance_id + "': " + e.what());
    }
  }
  detail::write_scores_atomic(o.out, scores);
  RunManifest m(name);
  m.config() = {{"corpus", o.corpus}, {"vocab", vocab_path}, {"trigger", o.trigger}, {"out", o.out}};
  m.add_input("corpus", o.corpus);
  m.add_input("vocabulary", vocab_path);
  m.add_output("scores", o.out);
  m.write(detail::manifest_path(o.out));
  out << "scored " << scores.size() << " lattices\n";
  detail::print_rates(out, scores, report_threshold);
}

struct EvalOptions {
  std::string scores, baseline_scores, threshold_from, roc, svg, summary;
  std::string method;
  std::optional<double> target_pm;
};

inline void run_eval(const EvalOptions& o, std::ostream& out) {
  const auto scores = read_scores(o.scores);
  const auto roc = roc_sweep(scores);
  const double e = eer(roc);
  const std::string method =
      o.method.empty() ? std::filesystem::path(o.scores).stem().string() : o.method;
  RunManifest m("eval");
  m.add_input("scores", o.scores);

  nlohmann::ordered_json summary;
  summary["method"] = method;
  std::optional<Rates> baseline;
  if (!o.baseline_scores.empty()) {
    baseline = apply_threshold(read_scores(o.baseline_scores), 0.5);
    m.add_input("baseline_scores", o.baseline_scores);
  }

  OperatingPoint op;
  std::string rule;
  if (!o.threshold_from.empty()) {
    const auto j = detail::read_json(o.threshold_from);
    if (!j.contains("threshold")) throw FormatError(o.threshold_from + ": missing 'threshold'");
    op.threshold = detail::threshold_from_json(j["threshold"]);
    const Rates r = apply_threshold(scores, op.threshold);
    op.p_miss = r.p_miss;
    op.p_fa = r.p_fa;
    rule = "transferred";
    m.add_input("threshold_from", o.threshold_from);
  } else if (o.target_pm || baseline) {
    const double target = o.target_pm ? *o.target_pm : baseline->p_miss;
    op = operating_point_closest_pm(roc, target);
    rule = "closest_pm";
    summary["target_pm"] = target;
  } else {
    op = operating_point_eer(roc);
    rule = "eer";
  }
  summary["selection"] = rule;
  summary["threshold"] = detail::threshold_to_json(op.threshold);
  summary["p_miss"] = op.p_miss;
  summary["p_fa"] = op.p_fa;
  summary["eer"] = e;
  if (baseline) summary["baseline"] = {{"p_miss", baseline->p_miss}, {"p_fa", baseline->p_fa}};

  Curve curve{method, roc, eer_point(roc), std::nullopt};
  if (rule != "eer") curve.selected_point = RocPoint{op.threshold, op.p_miss, op.p_fa};
  if (!o.roc.empty()) {
    std::ostringstream s;
    write_roc_csv(s, roc);
    write_atomic(o.roc, s.str());
    m.add_output("roc", o.roc);
  }
  if (!o.svg.empty()) {
    std::ostringstream s;
    write_roc_svg(s, {curve});
    write_atomic(o.svg, s.str());
    m.add_output("svg", o.svg);
  }
  if (!o.summary.empty()) {
    write_atomic(o.summary, summary.dump(2) + "\n");
    m.add_output("summary", o.summary);
  }
  nlohmann::ordered_json cfg = {{"scores", o.scores}, {"baseline_scores", o.baseline_scores},
                                {"threshold_from", o.threshold_from}, {"method", method},
                                {"roc", o.roc}, {"svg", o.svg}, {"summary", o.summary}};
  cfg["target_pm"] = o.target_pm ? nlohmann::ordered_json(*o.target_pm) : nlohmann::ordered_json();
  m.config() = cfg;
  const std::string anchor = !o.summary.empty() ? o.summary : !o.roc.empty() ? o.roc : o.svg;
  if (!anchor.empty()) m.write(detail::manifest_path(anchor));

  out << method << ": EER " << detail::percent(e) << "  P_M " << detail::percent(op.p_miss)
      << "  P_FA " << detail::percent(op.p_fa) << "  (" << rule << ", threshold "
      << format_double(op.threshold) << ")\n";
  if (baseline)
    out << "baseline: P_M " << detail::percent(baseline->p_miss) << "  P_FA "
        << detail::percent(baseline->p_fa) << '\n';
}

// ---------------------------------------------------------------------------

/// Parses argv and runs one subcommand.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Trigger-phrase detection on word lattices", "vtl"};
  app.set_version_flag("--version", std::string(VTL_VERSION));
  app.require_subcommand(1);
  app.fallthrough(false);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic corpus");
  gen_cmd->add_option("--config", gen.config, "Generator config JSON (defaults when omitted)");
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Override the config seed");

  TrainAeOptions tae;
  auto* tae_cmd = app.add_subcommand("train-ae", "Train the bag-of-phones autoencoder");
  tae_cmd->add_option("--lexicon", tae.lexicon, "Vocabulary TSV")->required();
  tae_cmd->add_option("--out", tae.out, "Output autoencoder JSON")->required();
  tae_cmd->add_option("--seed", tae.seed, "Random seed")->capture_default_str();
  tae_cmd->add_option("--epochs", tae.epochs, "Maximum gradient steps")->capture_default_str();
  tae_cmd->add_option("--lr", tae.learning_rate, "Learning rate")->capture_default_str();

  StatsOptions st;
  auto* st_cmd = app.add_subcommand("stats", "Fit feature normalization statistics");
  st_cmd->add_option("--corpus", st.corpus, "Corpus JSONL")->required();
  st_cmd->add_option("--ae", st.ae, "Autoencoder JSON")->required();
  st_cmd->add_option("--out", st.out, "Output statistics JSON")->required();
  st_cmd->add_option("--vocab", st.vocab, "Vocabulary TSV (default: vocab.tsv beside the corpus)");
  st_cmd->add_option("--trigger", st.trigger, "Trigger phrase")->capture_default_str();

  TrainOptions tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a lattice RNN detector");
  tr_cmd->add_option("--corpus", tr.corpus, "Training corpus JSONL")->required();
  tr_cmd->add_option("--ae", tr.ae, "Autoencoder JSON")->required();
  tr_cmd->add_option("--out", tr.out, "Output model JSON")->required();
  tr_cmd->add_option("--vocab", tr.vocab, "Vocabulary TSV (default: vocab.tsv beside the corpus)");
  tr_cmd->add_option("--stats", tr.stats, "Normalization statistics (default: fit on the corpus)");
  tr_cmd->add_option("--trigger", tr.trigger, "Trigger phrase")->capture_default_str();
  tr_cmd->add_option("--arch", tr.arch, "uni or bidir")
      ->check(CLI::IsMember({"uni", "bidir"}))
      ->capture_default_str();
  tr_cmd->add_option("--state-dim", tr.state_dim, "State vector size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr_cmd->add_option("--hidden", tr.hidden, "Classifier hidden size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  tr_cmd->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
  tr_cmd->add_option("--batch-size", tr.batch_size, "Lattices per update")->capture_default_str();
  tr_cmd->add_option("--lr", tr.learning_rate, "Adam learning rate")->capture_default_str();
  tr_cmd->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
  tr_cmd->add_flag("--quiet", tr.quiet, "Do not print per-epoch loss");

  ScoreOptions sc;
  auto* sc_cmd = app.add_subcommand("score", "Score a corpus with a trained model");
  sc_cmd->add_option("--model", sc.model, "Model JSON")->required();
  sc_cmd->add_option("--corpus", sc.corpus, "Corpus JSONL")->required();
  sc_cmd->add_option("--out", sc.out, "Output scores CSV")->required();
  sc_cmd->add_option("--jobs", sc.jobs, "Scoring threads")->capture_default_str();

  LatticeScoreOptions po;
  auto* po_cmd = app.add_subcommand("posterior", "Score a corpus by trigger-phrase posterior");
  LatticeScoreOptions bo;
  auto* bo_cmd = app.add_subcommand("baseline", "Score a corpus by the 1-best hypothesis");
  for (auto [cmd, opt] : {std::pair{po_cmd, &po}, std::pair{bo_cmd, &bo}}) {
    cmd->add_option("--corpus", opt->corpus, "Corpus JSONL")->required();
    cmd->add_option("--out", opt->out, "Output scores CSV")->required();
    cmd->add_option("--vocab", opt->vocab, "Vocabulary TSV (default: vocab.tsv beside the corpus)");
    cmd->add_option("--trigger", opt->trigger, "Trigger phrase")->capture_default_str();
  }

  EvalOptions ev;
  auto* ev_cmd = app.add_subcommand("eval", "ROC, EER and operating point of a score file");
  ev_cmd->add_option("--scores", ev.scores, "Scores CSV")->required();
  ev_cmd->add_option("--baseline-scores", ev.baseline_scores,
                     "Baseline scores; its P_M becomes the target");
  ev_cmd->add_option("--target-pm", ev.target_pm, "Select the point with P_M closest to this");
  ev_cmd->add_option("--threshold-from", ev.threshold_from,
                     "Apply the threshold recorded in this summary JSON");
  ev_cmd->add_option("--roc", ev.roc, "Output ROC CSV");
  ev_cmd->add_option("--svg", ev.svg, "Output ROC plot");
  ev_cmd->add_option("--summary", ev.summary, "Output summary JSON");
  ev_cmd->add_option("--method", ev.method, "Method name (default: scores file stem)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << VTL_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    const auto subs = app.get_subcommands();
    err << "error: " << e.what() << '\n' << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  try {
    if (*gen_cmd) run_gen(gen, out);
    else if (*tae_cmd) run_train_ae(tae, out);
    else if (*st_cmd) run_stats(st, out);
    else if (*tr_cmd) run_train(tr, out);
    else if (*sc_cmd) run_score(sc, out);
    else if (*po_cmd)
      run_lattice_scorer(
          "posterior", po,
          [](const Topology& t, const TriggerPhrase& v) { return trigger_posterior(t, v).posterior; },
          0.5, out);
    else if (*bo_cmd)
      run_lattice_scorer(
          "baseline", bo,
          [](const Topology& t, const TriggerPhrase& v) { return baseline_1best(t, v) ? 1.0 : 0.0; },
          0.5, out);
    else if (*ev_cmd) run_eval(ev, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace vtl::cli
