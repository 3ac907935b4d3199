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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "vtl/error.hpp"

namespace vtl {

using NodeId = std::uint32_t;
using WordId = std::uint32_t;

// Word id 0 is reserved for silence / epsilon arcs.
inline constexpr WordId kEpsilon = 0;

/// One word hypothesis. Scores are natural-log probabilities.
struct Arc {
  NodeId source = 0;
  NodeId dest = 0;
  WordId word = kEpsilon;
  std::uint32_t start_frame = 0;
  std::uint32_t end_frame = 0;
  double acoustic_logp = 0.0;
  double transition_logp = 0.0;

  std::uint32_t num_frames() const { return end_frame - start_frame; }

  friend bool operator==(const Arc&, const Arc&) = default;
};

/// Log-score of an arc: acoustic model score times `acoustic_scale` plus the
/// contextual transition score.
inline double arc_log_score(const Arc& arc, double acoustic_scale = 1.0) {
  return acoustic_scale * arc.acoustic_logp + arc.transition_logp;
}

/// A word hypothesis lattice. Immutable by convention once built; every
/// algorithm in the library takes it by const reference.
struct Lattice {
  std::string utterance_id;
  std::uint32_t num_nodes = 0;
  std::vector<Arc> arcs;
  std::optional<bool> label;  // true: utterance begins with the trigger phrase

  friend bool operator==(const Lattice&, const Lattice&) = default;
};

/// An initial-to-terminal path, as indices into Lattice::arcs.
struct Path {
  std::vector<std::size_t> arcs;
  double log_score = 0.0;
};

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind {
  kNoNodes,
  kNoArcs,
  kNodeOutOfRange,
  kFrameOrder,
  kNonFiniteScore,
  kPositiveTransition,
  kCycle,
  kNoInitialNode,
  kMultipleInitialNodes,
  kNoTerminalNode,
  kMultipleTerminalNodes,
  kUnreachableNode,
  kDeadEndNode,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(),
                       [kind](const Violation& v) { return v.kind == kind; });
  }
  std::string summary() const {
    std::string out;
    for (const auto& v : violations) {
      if (!out.empty()) out += "; ";
      out += v.message;
    }
    return out;
  }
};

namespace detail {

struct Adjacency {
  std::vector<std::vector<std::size_t>> in;
  std::vector<std::vector<std::size_t>> out;
};

// Arc lists per node keep ascending arc index order.
inline Adjacency build_adjacency(const Lattice& lat) {
  Adjacency adj;
  adj.in.resize(lat.num_nodes);
  adj.out.resize(lat.num_nodes);
  for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
    const Arc& a = lat.arcs[i];
    adj.out[a.source].push_back(i);
    adj.in[a.dest].push_back(i);
  }
  return adj;
}

// Kahn's algorithm with a min-heap so ties resolve to the smallest node id.
// Returns fewer than num_nodes entries when the graph has a cycle.
inline std::vector<NodeId> kahn_order(const Lattice& lat, const Adjacency& adj) {
  std::vector<std::size_t> indegree(lat.num_nodes);
  for (NodeId n = 0; n < lat.num_nodes; ++n) indegree[n] = adj.in[n].size();
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId n = 0; n < lat.num_nodes; ++n)
    if (indegree[n] == 0) ready.push(n);
  std::vector<NodeId> order;
  order.reserve(lat.num_nodes);
  while (!ready.empty()) {
    NodeId n = ready.top();
    ready.pop();
    order.push_back(n);
    for (std::size_t e : adj.out[n])
      if (--indegree[lat.arcs[e].dest] == 0) ready.push(lat.arcs[e].dest);
  }
  return order;
}

}  // namespace detail

/// Checks every structural invariant of a lattice. Violations are returned as
/// data; this never throws.
inline ValidationReport validate(const Lattice& lat) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::string msg) {
    report.violations.push_back({kind, std::move(msg)});
  };
  if (lat.num_nodes == 0) {
    add(ViolationKind::kNoNodes, "lattice has no nodes");
    return report;
  }
  if (lat.arcs.empty()) add(ViolationKind::kNoArcs, "lattice has no arcs");

  bool endpoints_ok = true;
  for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
    const Arc& a = lat.arcs[i];
    const std::string tag = "arc " + std::to_string(i);
    if (a.source >= lat.num_nodes || a.dest >= lat.num_nodes) {
      add(ViolationKind::kNodeOutOfRange, tag + ": node id out of range");
      endpoints_ok = false;
    }
    if (a.start_frame > a.end_frame)
      add(ViolationKind::kFrameOrder, tag + ": start_frame > end_frame");
    if (!std::isfinite(a.acoustic_logp) || !std::isfinite(a.transition_logp))
      add(ViolationKind::kNonFiniteScore, tag + ": non-finite score");
    else if (a.transition_logp > 0.0)
      add(ViolationKind::kPositiveTransition, tag + ": transition_logp > 0");
  }
  if (!endpoints_ok || lat.arcs.empty()) return report;

  const auto adj = detail::build_adjacency(lat);
  if (detail::kahn_order(lat, adj).size() != lat.num_nodes)
    add(ViolationKind::kCycle, "not a DAG");

  std::vector<NodeId> initial, terminal;
  for (NodeId n = 0; n < lat.num_nodes; ++n) {
    if (adj.in[n].empty()) initial.push_back(n);
    if (adj.out[n].empty()) terminal.push_back(n);
  }
  auto list = [](const std::vector<NodeId>& ids) {
    std::string s;
    for (NodeId n : ids) s += (s.empty() ? "" : ",") + std::to_string(n);
    return s;
  };
  if (initial.empty())
    add(ViolationKind::kNoInitialNode, "no initial node");
  else if (initial.size() > 1)
    add(ViolationKind::kMultipleInitialNodes,
        "multiple initial nodes (" + list(initial) + ")");
  if (terminal.empty())
    add(ViolationKind::kNoTerminalNode, "no terminal node");
  else if (terminal.size() > 1)
    add(ViolationKind::kMultipleTerminalNodes,
        "multiple terminal nodes (" + list(terminal) + ")");
  if (initial.size() != 1 || terminal.size() != 1) return report;

  // Reachability from the initial node and co-reachability to the terminal.
  auto sweep = [&](NodeId start, bool forward) {
    std::vector<char> seen(lat.num_nodes, 0);
    std::vector<NodeId> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
      NodeId n = stack.back();
      stack.pop_back();
      for (std::size_t e : forward ? adj.out[n] : adj.in[n]) {
        NodeId m = forward ? lat.arcs[e].dest : lat.arcs[e].source;
        if (!seen[m]) {
          seen[m] = 1;
          stack.push_back(m);
        }
      }
    }
    return seen;
  };
  const auto from_init = sweep(initial.front(), true);
  const auto to_term = sweep(terminal.front(), false);
  for (NodeId n = 0; n < lat.num_nodes; ++n) {
    if (!from_init[n])
      add(ViolationKind::kUnreachableNode,
          "node " + std::to_string(n) + " unreachable from initial node");
    if (!to_term[n])
      add(ViolationKind::kDeadEndNode,
          "node " + std::to_string(n) + " cannot reach terminal node");
  }
  return report;
}

/// Topological node order, ties broken by ascending node id. Throws
/// InvalidLattice on a cyclic graph.
inline std::vector<NodeId> topo_order(const Lattice& lat) {
  for (const Arc& a : lat.arcs)
    if (a.source >= lat.num_nodes || a.dest >= lat.num_nodes)
      throw InvalidLattice("lattice '" + lat.utterance_id +
                           "': node id out of range");
  const auto adj = detail::build_adjacency(lat);
  auto order = detail::kahn_order(lat, adj);
  if (order.size() != lat.num_nodes)
    throw InvalidLattice("lattice '" + lat.utterance_id + "': not a DAG");
  return order;
}

/// Validated view of a lattice with adjacency and topological order
/// precomputed. Does not own the lattice.
class Topology {
 public:
  explicit Topology(const Lattice& lat) : lat_(&lat) {
    if (auto report = validate(lat); !report.ok())
      throw InvalidLattice("lattice '" + lat.utterance_id +
                           "': " + report.summary());
    adj_ = detail::build_adjacency(lat);
    order_ = detail::kahn_order(lat, adj_);
    initial_ = order_.front();
    terminal_ = order_.back();
  }

  const Lattice& lattice() const { return *lat_; }
  const std::vector<NodeId>& order() const { return order_; }
  const std::vector<std::size_t>& incoming(NodeId n) const { return adj_.in[n]; }
  const std::vector<std::size_t>& outgoing(NodeId n) const { return adj_.out[n]; }
  NodeId initial() const { return initial_; }
  NodeId terminal() const { return terminal_; }
  std::size_t num_nodes() const { return lat_->num_nodes; }
  std::size_t num_arcs() const { return lat_->arcs.size(); }

 private:
  const Lattice* lat_;
  detail::Adjacency adj_;
  std::vector<NodeId> order_;
  NodeId initial_ = 0;
  NodeId terminal_ = 0;
};

inline constexpr std::size_t kDefaultPathCap = 100000;

/// Every initial-to-terminal path, in depth-first order over ascending arc
/// indices. Exponential in general; intended as a reference for small
/// lattices. Throws Error when more than `max_paths` paths exist.
inline std::vector<Path> enumerate_paths(const Lattice& lat,
                                         std::size_t max_paths = kDefaultPathCap,
                                         double acoustic_scale = 1.0) {
  const Topology topo(lat);
  std::vector<Path> paths;
  std::vector<std::size_t> stack;
  std::function<void(NodeId, double)> walk = [&](NodeId n, double score) {
    if (n == topo.terminal()) {
      if (paths.size() == max_paths)
        throw Error("path enumeration exceeded cap of " +
                    std::to_string(max_paths) + " paths");
      paths.push_back({stack, score});
      return;
    }
    for (std::size_t e : topo.outgoing(n)) {
      stack.push_back(e);
      walk(lat.arcs[e].dest, score + arc_log_score(lat.arcs[e], acoustic_scale));
      stack.pop_back();
    }
  };
  walk(topo.initial(), 0.0);
  return paths;
}

/// Word sequence of `path` with epsilon arcs dropped.
inline std::vector<WordId> path_words(const Lattice& lat, const Path& path) {
  std::vector<WordId> words;
  for (std::size_t e : path.arcs)
    if (lat.arcs[e].word != kEpsilon) words.push_back(lat.arcs[e].word);
  return words;
}

}  // namespace vtl
