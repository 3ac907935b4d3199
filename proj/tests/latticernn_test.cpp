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

#include <random>

#include <gtest/gtest.h>

#include "support/checks.hpp"
#include "support/random_lattice.hpp"
#include "vtl/latticernn.hpp"
#include "vtl/synthgen.hpp"

namespace vtl {
namespace {

using testing::random_features;
using testing::random_lattice;
using testing::random_params;

const ModelDims kSmall{19, 4, 3};

TEST(ParamCount, Examples) {
  EXPECT_EQ(param_count(Arch::kUnidirectional, 19, 24, 20), 1577);
  EXPECT_EQ(param_count(Arch::kBidirectional, 19, 15, 15), 1531);
  EXPECT_EQ(param_count(Arch::kUnidirectional, 1, 1, 1), 7);
}

TEST(ParamCount, MatchesAllocatedTensors) {
  for (Arch arch : {Arch::kUnidirectional, Arch::kBidirectional})
    for (int i : {1, 5, 19})
      for (int d : {1, 3, 15, 24})
        for (int h : {1, 7, 20}) {
          const auto p = init_network(arch, {i, d, h}, 1);
          long total = 0;
          p.for_each_tensor([&](const char*, const auto& t) { total += t.size(); });
          ASSERT_EQ(total, param_count(arch, i, d, h));
          ASSERT_EQ(p.size(), total);
        }
}

TEST(NetworkParams, ShapeErrorsNameTheTensor) {
  auto p = NetworkParams::zeros(Arch::kBidirectional, kSmall);
  p.backward->state_weights.resize(2, 2);
  try {
    p.check_shapes();
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("backward.state_weights"), std::string::npos) << e.what();
  }
  const auto good = NetworkParams::zeros(Arch::kUnidirectional, kSmall);
  const Lattice lat = testing::single_arc();
  EXPECT_THROW(forward_pass(lat, Eigen::MatrixXd::Zero(18, 1), good), DataError);
  EXPECT_THROW(forward_pass(lat, Eigen::MatrixXd::Zero(19, 2), good), DataError);
}

TEST(ForwardPass, ZeroParametersScoreOneHalf) {
  for (Arch arch : {Arch::kUnidirectional, Arch::kBidirectional}) {
    const auto p = NetworkParams::zeros(arch, kSmall);
    std::mt19937_64 rng(1);
    const auto st = forward_pass(testing::single_arc(), random_features(rng, 19, 1), p);
    EXPECT_EQ(st.arc_forward.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(st.score, 0.5);
  }
}

TEST(ForwardPass, DiamondMeanPooling) {
  Lattice lat;
  lat.num_nodes = 4;
  lat.arcs = {{0, 1, 1, 0, 1, -1, -1}, {0, 2, 2, 0, 1, -1, -1},
              {1, 3, 3, 1, 2, -1, -1}, {2, 3, 3, 1, 2, -1, -1}};
  std::mt19937_64 rng(2);
  const auto p = random_params(rng, Arch::kBidirectional, kSmall);
  const auto st = forward_pass(lat, random_features(rng, 19, 4), p);
  const Eigen::VectorXd u = st.arc_forward.col(2), v = st.arc_forward.col(3);
  EXPECT_LT((st.node_forward.col(3) - (u + v) / 2).cwiseAbs().maxCoeff(), 1e-15);
  // Single incoming arc: node state is that arc's state.
  EXPECT_EQ(st.node_forward.col(1), st.arc_forward.col(0));
  EXPECT_EQ(st.node_backward.col(1), st.arc_backward.col(2));
  EXPECT_EQ(st.node_forward.col(0), Eigen::VectorXd::Zero(4));
  EXPECT_EQ(st.node_backward.col(3), Eigen::VectorXd::Zero(4));
  EXPECT_EQ(st.embedding.head(4), st.node_forward.col(3));
  EXPECT_EQ(st.embedding.tail(4), st.node_backward.col(0));
}

TEST(ForwardPass, ChainEquivalence) {
  std::mt19937_64 rng(3);
  for (Arch arch : {Arch::kUnidirectional, Arch::kBidirectional})
    for (int trial = 0; trial < 50; ++trial) {
      testing::RandomLatticeOptions opt;
      opt.chain_only = true;
      opt.permute_nodes = false;
      opt.max_nodes = 12;
      const Lattice lat = random_lattice(rng, opt);
      // Sort arcs so arc i runs from node i to i+1.
      Lattice ordered = lat;
      std::sort(ordered.arcs.begin(), ordered.arcs.end(),
                [](const Arc& a, const Arc& b) { return a.source < b.source; });
      const auto p = random_params(rng, arch, kSmall);
      const auto f = random_features(rng, 19, ordered.arcs.size());
      ASSERT_LT(testing::chain_discrepancy(ordered, f, p), 1e-12);
    }
}

TEST(ForwardPass, ReversalDuality) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Lattice lat = random_lattice(rng);
    Lattice reversed = lat;
    for (auto& a : reversed.arcs) std::swap(a.source, a.dest);
    const auto p = random_params(rng, Arch::kBidirectional, kSmall);
    const auto f = random_features(rng, 19, lat.arcs.size());
    NetworkParams uni = NetworkParams::zeros(Arch::kUnidirectional, kSmall);
    uni.forward = *p.backward;
    const auto st = forward_pass(lat, f, p);
    const auto rt = forward_pass(reversed, f, uni);
    ASSERT_EQ(st.arc_backward, rt.arc_forward) << trial;
    ASSERT_EQ(st.node_backward, rt.node_forward) << trial;
  }
}

TEST(ForwardPass, TopologicalSoundness) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Lattice lat = random_lattice(rng);
    const Topology topo(lat);
    const auto p = random_params(rng, Arch::kBidirectional, kSmall);
    const auto f = random_features(rng, 19, lat.arcs.size());
    std::vector<int> node_done[2], arc_done[2];
    for (int d = 0; d < 2; ++d) {
      node_done[d].assign(lat.num_nodes, -1);
      arc_done[d].assign(lat.arcs.size(), -1);
    }
    int clock = 0;
    forward_pass(topo, f, p, [&](const PassEvent& ev) {
      const int d = ev.direction == Direction::kForward ? 0 : 1;
      (ev.is_arc ? arc_done[d] : node_done[d])[ev.id] = clock++;
    });
    for (std::size_t e = 0; e < lat.arcs.size(); ++e) {
      const Arc& a = lat.arcs[e];
      ASSERT_GE(arc_done[0][e], 0);
      ASSERT_GT(arc_done[0][e], node_done[0][a.source]);
      ASSERT_LT(arc_done[0][e], node_done[0][a.dest]);
      ASSERT_GT(arc_done[1][e], node_done[1][a.dest]);
      ASSERT_LT(arc_done[1][e], node_done[1][a.source]);
    }
  }
}

TEST(ForwardPass, NodeRelabelingInvariance) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const Lattice lat = random_lattice(rng);
    const auto p = random_params(rng, Arch::kBidirectional, kSmall);
    const auto f = random_features(rng, 19, lat.arcs.size());
    const double a = forward_pass(lat, f, p).score;
    const double b = forward_pass(testing::relabel_nodes(lat, rng), f, p).score;
    ASSERT_NEAR(a, b, 1e-14);
  }
}

TEST(Backprop, OutputBiasGradientIsScoreMinusLabel) {
  std::mt19937_64 rng(7);
  const Lattice lat = random_lattice(rng);
  const auto p = random_params(rng, Arch::kBidirectional, kSmall);
  const auto f = random_features(rng, 19, lat.arcs.size());
  const double s = forward_pass(lat, f, p).score;
  for (double y : {0.0, 1.0}) {
    const auto g = backprop(Topology(lat), f, p, y);
    EXPECT_NEAR(g.grad.head.out_bias, s - y, 1e-15);
    EXPECT_NEAR(g.loss, y > 0 ? -std::log(s) : -std::log(1 - s), 1e-12);
  }
}

TEST(Backprop, MatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  testing::RandomLatticeOptions opt;
  opt.max_arcs = 10;
  for (Arch arch : {Arch::kUnidirectional, Arch::kBidirectional})
    for (int trial = 0; trial < 10; ++trial) {
      const Lattice lat = random_lattice(rng, opt);
      const auto p = random_params(rng, arch, kSmall);
      const auto f = random_features(rng, 19, lat.arcs.size());
      const auto r = testing::check_gradient(lat, f, p, static_cast<double>(trial % 2));
      ASSERT_LT(r.max_rel_error, 1e-4) << arch_name(arch) << " trial " << trial;
      ASSERT_EQ(r.checked, p.size());
    }
}

TEST(Backprop, DuplicateBatchDoublesTheGradient) {
  std::mt19937_64 rng(9);
  const Lattice lat = random_lattice(rng);
  const auto p = random_params(rng, Arch::kBidirectional, kSmall);
  std::vector<Example> ex{{Topology(lat), random_features(rng, 19, lat.arcs.size()), 1.0}};
  ex.push_back(ex.front());
  auto one = NetworkParams::zeros(p.arch, p.dims), two = one;
  const std::size_t single[] = {0}, both[] = {0, 1};
  const double l1 = batch_gradient(ex, single, p, one);
  const double l2 = batch_gradient(ex, both, p, two);
  EXPECT_EQ(l2, 2 * l1);
  EXPECT_LT((two.flatten() - 2 * one.flatten()).cwiseAbs().maxCoeff(), 1e-14);
}

// Small separable corpus from the generator, features ready for training.
struct Fixture {
  GeneratedCorpus data;
  AutoencoderParams ae;
};

Fixture small_corpus(int n_pos, int n_neg) {
  GenConfig c;
  c.n_positive = n_pos;
  c.n_negative = n_neg;
  c.split = {1.0, 0.0, 0.0};
  c.seed = 5;
  Fixture fx;
  fx.data = generate(c);
  AutoencoderConfig ac;
  ac.epochs = 200;
  fx.ae = train_autoencoder(fx.data.vocab, ac).params;
  return fx;
}

TEST(Training, ReachesLowLossOnSmallCorpus) {
  const Fixture fx = small_corpus(25, 25);
  ASSERT_EQ(fx.data.split.train.size(), 50u);
  TrainConfig cfg;
  cfg.arch = Arch::kBidirectional;
  cfg.dims = {19, 15, 15};
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 10;
  const auto trained = train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg);
  EXPECT_LT(trained.log.epoch_loss.back(), 0.1);
  EXPECT_LT(trained.log.epoch_loss.back(), trained.log.initial_loss);
}

TEST(Training, SameSeedSameParameters) {
  const Fixture fx = small_corpus(10, 10);
  TrainConfig cfg;
  cfg.dims = kSmall;
  cfg.epochs = 5;
  cfg.batch_size = 4;
  const auto a = train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg);
  const auto b = train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg);
  EXPECT_EQ(a.model.network.flatten(), b.model.network.flatten());
  EXPECT_EQ(a.log.epoch_loss, b.log.epoch_loss);
  cfg.seed = 2;
  const auto c = train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg);
  EXPECT_NE(a.model.network.flatten(), c.model.network.flatten());
}

TEST(Training, ZeroLearningRateLeavesParametersAlone) {
  const Fixture fx = small_corpus(10, 10);
  TrainConfig cfg;
  cfg.dims = kSmall;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  const auto t = train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg);
  EXPECT_EQ(t.model.network.flatten(), init_network(cfg.arch, kSmall, cfg.seed).flatten());
  for (double l : t.log.epoch_loss) EXPECT_EQ(l, t.log.initial_loss);
}

TEST(Training, SingleClassCorpusIsRejected) {
  const Fixture fx = small_corpus(6, 0);
  TrainConfig cfg;
  cfg.dims = kSmall;
  EXPECT_THROW(train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg), ConfigError);
}

TEST(ScoreCorpus, OrderAndPurity) {
  const Fixture fx = small_corpus(12, 8);
  TrainConfig cfg;
  cfg.dims = kSmall;
  cfg.epochs = 2;
  const auto model = train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg).model;
  EXPECT_TRUE(score_corpus({}, model).empty());
  const auto& corpus = fx.data.split.train;
  const auto a = score_corpus(corpus, model);
  ASSERT_EQ(a.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(a[i].utt, corpus[i].utterance_id);
    EXPECT_EQ(a[i].label, corpus[i].label);
    EXPECT_GT(a[i].score, 0.0);
    EXPECT_LT(a[i].score, 1.0);
  }
  EXPECT_EQ(score_corpus(corpus, model), a);
  EXPECT_EQ(score_corpus(corpus, model, 3), a);
  EXPECT_EQ(score_corpus(corpus, model, 64), a);
}

TEST(ScoreCorpus, ErrorsCarryTheUtteranceId) {
  const Fixture fx = small_corpus(4, 4);
  TrainConfig cfg;
  cfg.dims = kSmall;
  cfg.epochs = 1;
  const auto model = train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg).model;
  auto corpus = fx.data.split.train;
  corpus[2].arcs[0].word = 9999;
  try {
    score_corpus(corpus, model, 2);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(corpus[2].utterance_id), std::string::npos) << e.what();
  }
}

TEST(ModelFile, JsonRoundTrip) {
  const Fixture fx = small_corpus(6, 6);
  for (Arch arch : {Arch::kUnidirectional, Arch::kBidirectional}) {
    TrainConfig cfg;
    cfg.arch = arch;
    cfg.dims = kSmall;
    cfg.epochs = 1;
    const auto model = train_model(fx.data.split.train, fx.data.vocab, fx.ae, fx.data.trigger, cfg).model;
    const std::string text = to_json(model).dump();
    const ModelParams back = model_from_json(nlohmann::json::parse(text));
    EXPECT_EQ(back.network.arch, arch);
    EXPECT_EQ(back.network.flatten(), model.network.flatten());
    EXPECT_TRUE(back.norm == model.norm);
    EXPECT_TRUE(back.ae == model.ae);
    EXPECT_TRUE(back.vocab == model.vocab);
    EXPECT_EQ(back.trigger.words, model.trigger.words);
    EXPECT_EQ(to_json(back).dump(), text);
    EXPECT_EQ(score_corpus(fx.data.split.train, back), score_corpus(fx.data.split.train, model));
  }
}

}  // namespace
}  // namespace vtl
