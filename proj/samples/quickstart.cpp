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

// Generates a small corpus, then compares the 1-best baseline, the lattice
// posterior and a bidirectional lattice RNN on its dev split.

#include <cstdio>

#include "vtl/evalkit.hpp"
#include "vtl/features.hpp"
#include "vtl/latticernn.hpp"
#include "vtl/posterior.hpp"
#include "vtl/synthgen.hpp"

int main() {
  vtl::GenConfig gen;
  gen.n_positive = 600;
  gen.n_negative = 300;
  const vtl::GeneratedCorpus data = vtl::generate(gen);
  const auto& train = data.split.train;
  const auto& dev = data.split.dev;

  std::vector<vtl::ScoredUtterance> baseline, posterior;
  for (const auto& lat : dev) {
    const vtl::Topology topo(lat);
    baseline.push_back({lat.utterance_id, vtl::baseline_1best(topo, data.trigger) ? 1.0 : 0.0, lat.label});
    posterior.push_back({lat.utterance_id, vtl::trigger_posterior(topo, data.trigger).posterior, lat.label});
  }
  const vtl::Rates base = vtl::apply_threshold(baseline, 0.5);
  std::printf("baseline   P_M %6.2f%%  P_FA %6.2f%%\n", 100 * base.p_miss, 100 * base.p_fa);

  const auto ae = vtl::train_autoencoder(data.vocab).params;
  vtl::TrainConfig cfg;
  cfg.arch = vtl::Arch::kBidirectional;
  cfg.dims = {vtl::kFeatureDim, 15, 15};
  cfg.epochs = 40;
  const auto model = vtl::train_model(train, data.vocab, ae, data.trigger, cfg).model;
  const auto rnn = vtl::score_corpus(dev, model);

  for (const auto& [name, scores] : {std::pair{"posterior", static_cast<const std::vector<vtl::ScoredUtterance>*>(&posterior)}, std::pair{"bidir", &rnn}}) {
    const auto roc = vtl::roc_sweep(*scores);
    const auto op = vtl::operating_point_closest_pm(roc, base.p_miss);
    std::printf("%-10s P_M %6.2f%%  P_FA %6.2f%%  EER %6.2f%%\n", name, 100 * op.p_miss,
                100 * op.p_fa, 100 * vtl::eer(roc));
  }
  return 0;
}
