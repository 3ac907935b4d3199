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

// Trigger-phrase posterior from a word lattice.
//
// The posterior that the utterance starts with the trigger V is
//
//   P(V | X) = sum_{q_V} p(X_V, q_V) * beta(end(q_V)) / sum_q p(X, q)
//
// where q_V ranges over the initial partial paths whose words are exactly V
// and beta is the standard backward score. Everything is in the log domain.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "vtl/error.hpp"
#include "vtl/lattice.hpp"
#include "vtl/vocabulary.hpp"

namespace vtl {

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

/// log(sum(exp(v))) shifted by the maximum. Throws on an empty input.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw Error("log_sum_exp of an empty list");
  const double hi = *std::max_element(values.begin(), values.end());
  if (values.size() == 1 || hi == kLogZero) return hi;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kLogZero) return a;
  return a + std::log1p(std::exp(b - a));
}

struct ForwardBackwardScores {
  std::vector<double> forward;   // alpha per node
  std::vector<double> backward;  // beta per node
  NodeId initial = 0;
  NodeId terminal = 0;

  // Total lattice log-evidence, alpha(terminal).
  double log_evidence() const { return forward[terminal]; }
};

inline ForwardBackwardScores forward_backward(const Topology& topo,
                                              double acoustic_scale = 1.0) {
  const Lattice& lat = topo.lattice();
  ForwardBackwardScores fb;
  fb.initial = topo.initial();
  fb.terminal = topo.terminal();
  fb.forward.assign(topo.num_nodes(), kLogZero);
  fb.backward.assign(topo.num_nodes(), kLogZero);

  std::vector<double> terms;
  fb.forward[fb.initial] = 0.0;
  for (NodeId n : topo.order()) {
    if (n == fb.initial) continue;
    terms.clear();
    for (std::size_t e : topo.incoming(n))
      terms.push_back(fb.forward[lat.arcs[e].source] +
                      arc_log_score(lat.arcs[e], acoustic_scale));
    fb.forward[n] = log_sum_exp(terms);
  }
  fb.backward[fb.terminal] = 0.0;
  for (auto it = topo.order().rbegin(); it != topo.order().rend(); ++it) {
    const NodeId n = *it;
    if (n == fb.terminal) continue;
    terms.clear();
    for (std::size_t e : topo.outgoing(n))
      terms.push_back(fb.backward[lat.arcs[e].dest] +
                      arc_log_score(lat.arcs[e], acoustic_scale));
    fb.backward[n] = log_sum_exp(terms);
  }
  return fb;
}

inline ForwardBackwardScores forward_backward(const Lattice& lat,
                                              double acoustic_scale = 1.0) {
  return forward_backward(Topology(lat), acoustic_scale);
}

struct PrefixMatch {
  NodeId end_node;
  double log_score;  // log p(X_V, q_V)
  std::vector<std::size_t> arcs;
};

/// All initial partial paths whose non-epsilon words are exactly the trigger.
/// Epsilon arcs before and between trigger words are consumed transparently;
/// a match ends on the arc carrying the last trigger word, so each full path
/// is covered by at most one match.
inline std::vector<PrefixMatch> match_trigger_prefixes(const Topology& topo,
                                                       const TriggerPhrase& trigger,
                                                       double acoustic_scale = 1.0) {
  const Lattice& lat = topo.lattice();
  std::vector<PrefixMatch> matches;
  if (trigger.words.empty()) return matches;
  std::vector<std::size_t> stack;
  // Depth-first over (node, words matched so far).
  auto walk = [&](auto&& self, NodeId n, std::size_t matched, double score) -> void {
    for (std::size_t e : topo.outgoing(n)) {
      const Arc& a = lat.arcs[e];
      std::size_t next = matched;
      if (a.word != kEpsilon) {
        if (a.word != trigger.words[matched]) continue;
        ++next;
      }
      const double s = score + arc_log_score(a, acoustic_scale);
      stack.push_back(e);
      if (next == trigger.size())
        matches.push_back({a.dest, s, stack});
      else
        self(self, a.dest, next, s);
      stack.pop_back();
    }
  };
  walk(walk, topo.initial(), 0, 0.0);
  return matches;
}

inline std::vector<PrefixMatch> match_trigger_prefixes(const Lattice& lat,
                                                       const TriggerPhrase& trigger,
                                                       double acoustic_scale = 1.0) {
  return match_trigger_prefixes(Topology(lat), trigger, acoustic_scale);
}

struct PosteriorResult {
  double log_numerator = kLogZero;
  double log_evidence = 0.0;
  double posterior = 0.0;
};

inline PosteriorResult trigger_posterior(const Topology& topo,
                                         const TriggerPhrase& trigger,
                                         double acoustic_scale = 1.0) {
  const auto fb = forward_backward(topo, acoustic_scale);
  PosteriorResult r;
  r.log_evidence = fb.log_evidence();
  const auto matches = match_trigger_prefixes(topo, trigger, acoustic_scale);
  if (matches.empty()) return r;
  std::vector<double> terms;
  terms.reserve(matches.size());
  for (const auto& m : matches) terms.push_back(m.log_score + fb.backward[m.end_node]);
  r.log_numerator = log_sum_exp(terms);
  r.posterior = std::exp(r.log_numerator - r.log_evidence);
  return r;
}

inline PosteriorResult trigger_posterior(const Lattice& lat,
                                         const TriggerPhrase& trigger,
                                         double acoustic_scale = 1.0) {
  return trigger_posterior(Topology(lat), trigger, acoustic_scale);
}

// Accept at the boundary.
inline bool detect(double posterior, double threshold) {
  return posterior >= threshold;
}

}  // namespace vtl
