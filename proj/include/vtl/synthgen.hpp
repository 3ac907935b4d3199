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

// Synthetic labeled lattice corpora.
//
// Each utterance is a sequence of word slots with frame spans drawn from
// [5, 40]. Every slot carries the true word plus competing hypotheses, and a
// few arcs span two slots. Positives start with the trigger phrase. Most
// negatives get "hallucinated" trigger arcs over their first slots whose
// scores are inflated, mostly through the transition score, so that the
// 1-best path often starts with the trigger. Hallucinated regions also carry
// denser and closer competition, which a model reading the whole lattice can
// pick up but the posterior cannot.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "vtl/error.hpp"
#include "vtl/lattice.hpp"
#include "vtl/vocabulary.hpp"

namespace vtl {

struct GenConfig {
  std::uint64_t seed = 7;
  int vocab_size = 120;
  std::string trigger = "hey siri";
  int n_positive = 2480;
  int n_negative = 1240;
  double branch_factor = 3.5;  // mean parallel hypotheses per slot
  int depth_min = 6;           // words per utterance
  int depth_max = 14;
  double hallucination_rate = 0.85;
  double hallucination_bias = 8.0;
  double score_noise = 1.0;
  std::array<double, 3> split = {3.7, 1.0, 2.0};  // train : dev : eval

  void check() const {
    if (vocab_size < 10) throw ConfigError("gen: vocab_size must be >= 10");
    if (n_positive < 0 || n_negative < 0 || n_positive + n_negative == 0)
      throw ConfigError("gen: lattice counts must be non-negative with a positive total");
    if (branch_factor < 1.0) throw ConfigError("gen: branch_factor must be >= 1");
    if (depth_min < 1 || depth_min > depth_max) throw ConfigError("gen: need 1 <= depth_min <= depth_max");
    if (hallucination_rate < 0.0 || hallucination_rate > 1.0)
      throw ConfigError("gen: hallucination_rate must be in [0, 1]");
    if (hallucination_bias < 0.0) throw ConfigError("gen: hallucination_bias must be >= 0");
    if (score_noise < 0.0) throw ConfigError("gen: score_noise must be >= 0");
    for (double r : split)
      if (r < 0.0) throw ConfigError("gen: split ratios must be >= 0");
    if (split[0] + split[1] + split[2] <= 0.0) throw ConfigError("gen: split ratios sum to 0");
  }
};

inline nlohmann::ordered_json to_json(const GenConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["vocab_size"] = c.vocab_size;
  j["trigger"] = c.trigger;
  j["n_positive"] = c.n_positive;
  j["n_negative"] = c.n_negative;
  j["branch_factor"] = c.branch_factor;
  j["depth_range"] = {c.depth_min, c.depth_max};
  j["hallucination_rate"] = c.hallucination_rate;
  j["hallucination_bias"] = c.hallucination_bias;
  j["score_noise"] = c.score_noise;
  j["split"] = c.split;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
template <typename Json>
GenConfig gen_config_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("gen config: expected a JSON object");
  GenConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seed") c.seed = v.template get<std::uint64_t>();
      else if (key == "vocab_size") c.vocab_size = v.template get<int>();
      else if (key == "trigger") c.trigger = v.template get<std::string>();
      else if (key == "n_positive") c.n_positive = v.template get<int>();
      else if (key == "n_negative") c.n_negative = v.template get<int>();
      else if (key == "branch_factor") c.branch_factor = v.template get<double>();
      else if (key == "depth_range") {
        const auto r = v.template get<std::vector<int>>();
        if (r.size() != 2) throw ConfigError("gen config: depth_range needs [min, max]");
        c.depth_min = r[0];
        c.depth_max = r[1];
      } else if (key == "hallucination_rate") c.hallucination_rate = v.template get<double>();
      else if (key == "hallucination_bias") c.hallucination_bias = v.template get<double>();
      else if (key == "score_noise") c.score_noise = v.template get<double>();
      else if (key == "split") c.split = v.template get<std::array<double, 3>>();
      else throw ConfigError("gen config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gen config: ") + e.what());
  }
  c.check();
  return c;
}

struct CorpusSplit {
  std::vector<Lattice> train;
  std::vector<Lattice> dev;
  std::vector<Lattice> eval;
};

struct GeneratedCorpus {
  Vocabulary vocab;
  TriggerPhrase trigger;
  CorpusSplit split;
};

namespace detail {

// Word groups of the synthetic lexicon.
struct SynthLexicon {
  Vocabulary vocab;
  std::vector<WordId> trigger;
  std::vector<std::vector<WordId>> confusables;  // per trigger word
  std::vector<WordId> command;     // typical after a genuine trigger
  std::vector<WordId> background;  // typical of false triggers
};

inline Pronunciation random_pron(std::mt19937_64& rng, int min_len, int max_len) {
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<int> phone(1, static_cast<int>(kNumPhones) - 1);
  Pronunciation p(static_cast<std::size_t>(len(rng)));
  for (auto& ph : p) ph = static_cast<PhoneId>(phone(rng));
  return p;
}

inline SynthLexicon make_lexicon(const GenConfig& c, std::mt19937_64& rng) {
  SynthLexicon lex;
  lex.vocab.add("<sil>", {});
  std::istringstream in(c.trigger);
  std::string w;
  std::vector<std::string> trigger_words;
  while (in >> w) trigger_words.push_back(w);
  if (trigger_words.empty()) throw ConfigError("gen: empty trigger phrase");
  constexpr int kConfusables = 2;
  const int needed = 1 + static_cast<int>(trigger_words.size()) * (1 + kConfusables) + 4;
  if (c.vocab_size < needed)
    throw ConfigError("gen: vocab_size must be >= " + std::to_string(needed) + " for this trigger");

  std::vector<Pronunciation> trigger_prons;
  for (const auto& tw : trigger_words) {
    trigger_prons.push_back(random_pron(rng, 2, 5));
    lex.trigger.push_back(lex.vocab.add(tw, trigger_prons.back()));
  }
  std::uniform_int_distribution<int> phone(1, static_cast<int>(kNumPhones) - 1);
  for (std::size_t t = 0; t < trigger_words.size(); ++t) {
    lex.confusables.emplace_back();
    for (int k = 0; k < kConfusables; ++k) {
      Pronunciation p = trigger_prons[t];
      p[std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng)] =
          static_cast<PhoneId>(phone(rng));
      lex.confusables[t].push_back(
          lex.vocab.add(trigger_words[t] + "_alt" + std::to_string(k + 1), std::move(p)));
    }
  }
  int index = 0;
  while (static_cast<int>(lex.vocab.size()) < c.vocab_size) {
    char name[16];
    std::snprintf(name, sizeof name, "w%03d", index);
    const WordId id = lex.vocab.add(name, random_pron(rng, 2, 7));
    (index % 2 == 0 ? lex.command : lex.background).push_back(id);
    ++index;
  }
  return lex;
}

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

inline double chance(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

// Builds one lattice. `label` decides the generative word sequence. Node k
// is the start of slot k, and the first arc listed with source k carries the
// generative word of that slot.
inline Lattice make_lattice(const GenConfig& c, const SynthLexicon& lex, bool label,
                            std::uint64_t utt_seed, std::string utt_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32),
                    static_cast<std::uint32_t>(utt_seed), static_cast<std::uint32_t>(utt_seed >> 32)};
  std::mt19937_64 rng(seq);
  const double alt = std::min(1.0, c.branch_factor - 1.0);  // 0 disables all alternatives
  const std::size_t n_trig = lex.trigger.size();

  // Generative word sequence.
  int depth = std::uniform_int_distribution<int>(c.depth_min, c.depth_max)(rng);
  const bool hallucinate = !label && chance(rng) < c.hallucination_rate;
  if (label || hallucinate) depth = std::max<int>(depth, static_cast<int>(n_trig) + 1);
  std::vector<WordId> words;
  auto content_word = [&](bool after_trigger) {
    const bool command = after_trigger ? chance(rng) < 0.75 : chance(rng) < 0.25;
    return pick(command ? lex.command : lex.background, rng);
  };
  if (label) {
    words = lex.trigger;
  } else if (chance(rng) < 0.5) {
    words.push_back(pick(lex.confusables.front(), rng));
  }
  while (static_cast<int>(words.size()) < depth) words.push_back(content_word(label));

  // Slot layout: optional leading/trailing silence, one slot per word.
  struct Slot {
    WordId word;
    std::uint32_t start, end;
  };
  std::vector<Slot> slots;
  std::uint32_t t = 0;
  std::uniform_int_distribution<std::uint32_t> span(5, 40);
  auto add_slot = [&](WordId w) {
    const std::uint32_t len = span(rng);
    slots.push_back({w, t, t + len});
    t += len;
  };
  const bool lead_sil = chance(rng) < 0.5 * alt;
  if (lead_sil) add_slot(kEpsilon);
  const std::size_t first_word = slots.size();
  for (WordId w : words) add_slot(w);
  if (chance(rng) < 0.3 * alt) add_slot(kEpsilon);

  Lattice lat;
  lat.utterance_id = std::move(utt_id);
  lat.label = label;
  lat.num_nodes = static_cast<std::uint32_t>(slots.size() + 1);
  std::normal_distribution<double> noise(0.0, c.score_noise);
  auto lm_score = [&](double mean) {
    return -std::abs(std::normal_distribution<double>(mean, 0.5)(rng));
  };
  auto add_arc = [&](std::size_t from, std::size_t to, WordId w, double cost_per_frame,
                     double transition, double bonus = 0.0) {
    const std::uint32_t s = slots[from].start, e = slots[to - 1].end;
    Arc a;
    a.source = static_cast<NodeId>(from);
    a.dest = static_cast<NodeId>(to);
    a.word = w;
    a.start_frame = s;
    a.end_frame = e;
    a.acoustic_logp = -cost_per_frame * static_cast<double>(e - s) + noise(rng) + bonus;
    a.transition_logp = std::min(0.0, transition);
    lat.arcs.push_back(a);
  };
  auto competitor_word = [&](std::size_t slot) {
    const std::size_t k = slot - first_word;
    if (slot >= first_word && k < n_trig && label && chance(rng) < 0.5)
      return pick(lex.confusables[k], rng);
    return content_word(chance(rng) < 0.5);
  };
  const double mean_competitors = c.branch_factor - 1.0;
  auto competitors = [&](std::mt19937_64& g) {
    return mean_competitors > 0.0 ? std::poisson_distribution<int>(mean_competitors)(g) : 0;
  };
  std::uniform_real_distribution<double> gap(0.08, 0.6);
  std::uniform_real_distribution<double> close_gap(0.0, 0.4);

  for (std::size_t k = 0; k < slots.size(); ++k) {
    const Slot& s = slots[k];
    const bool trig_slot = k >= first_word && k - first_word < n_trig;
    if (s.word == kEpsilon) {
      add_arc(k, k + 1, kEpsilon, 0.9, -0.1);
    } else if (label && trig_slot) {
      add_arc(k, k + 1, s.word, 1.0, lm_score(0.6));
    } else {
      add_arc(k, k + 1, s.word, 1.0, lm_score(2.0));
    }
    int n_comp = competitors(rng);
    if (hallucinate && trig_slot) n_comp += competitors(rng) / 2;
    for (int i = 0; i < n_comp; ++i) {
      const double g = hallucinate && trig_slot ? close_gap(rng) : gap(rng);
      add_arc(k, k + 1, competitor_word(k), 1.0 + g, lm_score(2.5));
    }
    if (hallucinate && trig_slot) {
      // Spurious trigger arc: weaker acoustics, strongly favored transition.
      const WordId tw = lex.trigger[k - first_word];
      add_arc(k, k + 1, tw, 1.0 + 0.5 * gap(rng), lm_score(0.6), c.hallucination_bias);
    }
    if (k + 2 <= slots.size() && k >= first_word && chance(rng) < 0.15 * alt) {
      add_arc(k, k + 2, content_word(false), 1.0 + gap(rng), lm_score(2.5));
    }
  }
  return lat;
}

}  // namespace detail

/// Generates a labeled corpus split three ways. Each lattice is built from a
/// generator seeded by (config seed, utterance index), so output depends only
/// on the configuration.
inline GeneratedCorpus generate(const GenConfig& config) {
  config.check();
  std::mt19937_64 rng(config.seed);
  GeneratedCorpus out;
  auto lex = detail::make_lexicon(config, rng);
  out.trigger = TriggerPhrase(lex.trigger);

  const int total = config.n_positive + config.n_negative;
  std::vector<char> labels(static_cast<std::size_t>(total), 0);
  std::fill_n(labels.begin(), config.n_positive, 1);
  std::shuffle(labels.begin(), labels.end(), rng);

  // Stratified split; each class is cut in the configured proportions.
  const double sum = config.split[0] + config.split[1] + config.split[2];
  std::vector<int> which(static_cast<std::size_t>(total), 0);
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<int> members;
    for (int i = 0; i < total; ++i)
      if (labels[static_cast<std::size_t>(i)] == cls) members.push_back(i);
    const auto n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * config.split[0] / sum));
    const auto n_dev = std::min(members.size() - std::min(members.size(), n_train),
                                static_cast<std::size_t>(std::llround(n * config.split[1] / sum)));
    for (std::size_t k = 0; k < members.size(); ++k)
      which[static_cast<std::size_t>(members[k])] = k < n_train ? 0 : k < n_train + n_dev ? 1 : 2;
  }

  for (int i = 0; i < total; ++i) {
    char id[24];
    std::snprintf(id, sizeof id, "utt%06d", i);
    auto lat = detail::make_lattice(config, lex, labels[static_cast<std::size_t>(i)] != 0,
                                    static_cast<std::uint64_t>(i), id);
    switch (which[static_cast<std::size_t>(i)]) {
      case 0: out.split.train.push_back(std::move(lat)); break;
      case 1: out.split.dev.push_back(std::move(lat)); break;
      default: out.split.eval.push_back(std::move(lat)); break;
    }
  }
  out.vocab = std::move(lex.vocab);
  return out;
}

struct SplitStats {
  std::size_t lattices = 0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double mean_arcs = 0.0;
  double mean_frames = 0.0;  // frames spanned per lattice
};

inline SplitStats corpus_stats(const std::vector<Lattice>& split) {
  SplitStats s;
  double arcs = 0.0, frames = 0.0;
  for (const auto& lat : split) {
    ++s.lattices;
    if (lat.label) (*lat.label ? s.positives : s.negatives)++;
    arcs += static_cast<double>(lat.arcs.size());
    std::uint32_t lo = std::numeric_limits<std::uint32_t>::max(), hi = 0;
    for (const auto& a : lat.arcs) {
      lo = std::min(lo, a.start_frame);
      hi = std::max(hi, a.end_frame);
    }
    if (!lat.arcs.empty()) frames += static_cast<double>(hi - lo);
  }
  if (s.lattices) {
    s.mean_arcs = arcs / static_cast<double>(s.lattices);
    s.mean_frames = frames / static_cast<double>(s.lattices);
  }
  return s;
}

struct CorpusStats {
  SplitStats train, dev, eval;
};

inline CorpusStats corpus_stats(const CorpusSplit& split) {
  return {corpus_stats(split.train), corpus_stats(split.dev), corpus_stats(split.eval)};
}

}  // namespace vtl
