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

#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "support/oracles.hpp"
#include "support/random_lattice.hpp"
#include "vtl/corpus_io.hpp"
#include "vtl/evalkit.hpp"
#include "vtl/posterior.hpp"
#include "vtl/synthgen.hpp"

namespace vtl {
namespace {

std::vector<Lattice> all_lattices(const CorpusSplit& s) {
  std::vector<Lattice> out = s.train;
  out.insert(out.end(), s.dev.begin(), s.dev.end());
  out.insert(out.end(), s.eval.begin(), s.eval.end());
  return out;
}

// Word sequence along the generative arcs: the first arc listed out of each
// node, from node 0 to the last node.
std::vector<WordId> generative_words(const Lattice& lat) {
  std::vector<WordId> words;
  for (NodeId n = 0; n + 1 < lat.num_nodes; ++n)
    for (const Arc& a : lat.arcs)
      if (a.source == n) {
        EXPECT_EQ(a.dest, n + 1);
        if (a.word != kEpsilon) words.push_back(a.word);
        break;
      }
  return words;
}

std::string serialize(const GeneratedCorpus& g) {
  std::ostringstream out;
  write_vocabulary(out, g.vocab);
  write_corpus(out, g.split.train);
  write_corpus(out, g.split.dev);
  write_corpus(out, g.split.eval);
  return out.str();
}

GenConfig small_config() {
  GenConfig c;
  c.n_positive = 200;
  c.n_negative = 100;
  return c;
}

TEST(Generate, DegenerateConfigIsAChain) {
  GenConfig c;
  c.n_positive = 1;
  c.n_negative = 0;
  c.branch_factor = 1.0;
  const auto g = generate(c);
  const auto lats = all_lattices(g.split);
  ASSERT_EQ(lats.size(), 1u);
  const Lattice& lat = lats[0];
  EXPECT_EQ(lat.arcs.size() + 1, lat.num_nodes);
  EXPECT_EQ(testing::dp_path_count(lat), 1u);
  EXPECT_EQ(lat.arcs[0].word, g.trigger.words[0]);
  EXPECT_EQ(lat.arcs[1].word, g.trigger.words[1]);
  EXPECT_EQ(trigger_posterior(lat, g.trigger).posterior, 1.0);
}

TEST(Generate, SameSeedSameBytes) {
  const auto a = serialize(generate(small_config()));
  EXPECT_EQ(a, serialize(generate(small_config())));
  GenConfig other = small_config();
  other.seed = 8;
  EXPECT_NE(a, serialize(generate(other)));
}

TEST(Generate, LatticesAreValidAndLabelsSound) {
  const auto g = generate(small_config());
  std::set<std::string> ids;
  for (const auto& lat : all_lattices(g.split)) {
    ASSERT_TRUE(validate(lat).ok()) << lat.utterance_id << ": " << validate(lat).summary();
    check_words(lat, g.vocab);
    ASSERT_TRUE(ids.insert(lat.utterance_id).second);
    ASSERT_TRUE(lat.label.has_value());
    const bool trigger_initial = starts_with_trigger(generative_words(lat), g.trigger);
    ASSERT_EQ(trigger_initial, *lat.label) << lat.utterance_id;
    if (*lat.label) {
      ASSERT_FALSE(match_trigger_prefixes(lat, g.trigger).empty());
    }
  }
}

TEST(Generate, SplitsAreStratified) {
  const auto g = generate(GenConfig{});
  const auto st = corpus_stats(g.split);
  EXPECT_GE(st.train.lattices, 2000u);
  EXPECT_GE(st.dev.lattices, 500u);
  EXPECT_GE(st.eval.lattices, 1000u);
  for (const auto* s : {&st.train, &st.dev, &st.eval}) {
    EXPECT_GT(s->positives, 0u);
    EXPECT_GT(s->negatives, 0u);
    EXPECT_NEAR(static_cast<double>(s->positives) / static_cast<double>(s->negatives), 2.0, 0.05);
  }
  EXPECT_NEAR(static_cast<double>(st.train.lattices) / static_cast<double>(st.dev.lattices), 3.7, 0.1);
  EXPECT_NEAR(static_cast<double>(st.eval.lattices) / static_cast<double>(st.dev.lattices), 2.0, 0.1);
}

TEST(Generate, BaselineRegimeAndSize) {
  GenConfig c;
  c.n_positive = 500;
  c.n_negative = 500;
  const auto g = generate(c);
  const auto lats = all_lattices(g.split);
  ASSERT_EQ(lats.size(), 1000u);
  double fa = 0, neg = 0, miss = 0, pos = 0;
  for (const auto& lat : lats) {
    const bool hit = baseline_1best(lat, g.trigger);
    if (*lat.label) {
      ++pos;
      miss += !hit;
    } else {
      ++neg;
      fa += hit;
    }
  }
  EXPECT_GT(fa / neg, 0.5);
  EXPECT_LT(miss / pos, 0.05);
  const auto st = corpus_stats(lats);
  EXPECT_GE(st.mean_arcs, 20.0);
  EXPECT_LE(st.mean_arcs, 80.0);
}

TEST(Generate, RejectsBadConfig) {
  GenConfig c;
  c.depth_min = 9;
  c.depth_max = 3;
  EXPECT_THROW(generate(c), ConfigError);
  c = GenConfig{};
  c.branch_factor = 0.5;
  EXPECT_THROW(generate(c), ConfigError);
  c = GenConfig{};
  c.vocab_size = 5;
  EXPECT_THROW(generate(c), ConfigError);
}

TEST(GenConfig, JsonRoundTripAndUnknownKeys) {
  GenConfig c = small_config();
  c.hallucination_bias = 3.25;
  const GenConfig back = gen_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_THROW(gen_config_from_json(nlohmann::json::parse(R"({"sede": 3})")), ConfigError);
  EXPECT_THROW(gen_config_from_json(nlohmann::json::parse(R"({"depth_range": [1]})")), ConfigError);
  EXPECT_THROW(gen_config_from_json(nlohmann::json::parse(R"({"seed": "x"})")), ConfigError);
}

TEST(CorpusStats, Examples) {
  const auto empty = corpus_stats(std::vector<Lattice>{});
  EXPECT_EQ(empty.lattices, 0u);
  EXPECT_EQ(empty.positives, 0u);
  EXPECT_EQ(empty.negatives, 0u);
  EXPECT_EQ(empty.mean_arcs, 0.0);

  std::vector<Lattice> ten(10, testing::single_arc());
  for (int i = 0; i < 10; ++i) ten[static_cast<std::size_t>(i)].label = i < 3;
  const auto s = corpus_stats(ten);
  EXPECT_EQ(s.lattices, 10u);
  EXPECT_EQ(s.positives, 3u);
  EXPECT_EQ(s.negatives, 7u);
  EXPECT_EQ(s.mean_arcs, 1.0);
  EXPECT_EQ(s.mean_frames, 10.0);
}

}  // namespace
}  // namespace vtl
