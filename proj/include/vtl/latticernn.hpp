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

// Lattice recurrent network.
//
// Forward direction, over arcs in topological order of their source node:
//
//   h_f(e) = tanh(U_f' x(e) + V_f' h_f(src(e)) + b_f)
//   h_f(s) = mean { h_f(e) : dst(e) = s },      h_f(initial) = 0
//
// Backward direction, mirrored over destination nodes:
//
//   h_b(e) = tanh(U_b' x(e) + V_b' h_b(dst(e)) + b_b)
//   h_b(s) = mean { h_b(e) : src(e) = s },      h_b(terminal) = 0
//
// The lattice embedding is h_f(terminal), concatenated with h_b(initial) in
// the bidirectional model. A one-hidden-layer tanh network maps it to a
// logit, and the score is sigmoid(logit).

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vtl/error.hpp"
#include "vtl/features.hpp"
#include "vtl/lattice.hpp"
#include "vtl/scores.hpp"
#include "vtl/vocabulary.hpp"

namespace vtl {

enum class Arch { kUnidirectional, kBidirectional };

inline const char* arch_name(Arch a) {
  return a == Arch::kBidirectional ? "bidir" : "uni";
}

inline Arch parse_arch(std::string_view s) {
  if (s == "uni" || s == "unidirectional") return Arch::kUnidirectional;
  if (s == "bidir" || s == "bidirectional") return Arch::kBidirectional;
  throw ConfigError("unknown architecture '" + std::string(s) + "' (expected uni or bidir)");
}

struct ModelDims {
  int input_dim = kFeatureDim;
  int state_dim = 15;
  int hidden_dim = 15;
};

/// Number of trainable parameters of a network with the given shape.
inline long param_count(Arch arch, long input_dim, long state_dim, long hidden_dim) {
  const long recurrence = input_dim * state_dim + state_dim * state_dim + state_dim;
  const long directions = arch == Arch::kBidirectional ? 2 : 1;
  const long embed = directions * state_dim;
  return directions * recurrence + (embed * hidden_dim + hidden_dim) + (hidden_dim + 1);
}

struct DirectionParams {
  Eigen::MatrixXd input_weights;  // input_dim x d
  Eigen::MatrixXd state_weights;  // d x d
  Eigen::VectorXd bias;           // d
};

struct HeadParams {
  Eigen::MatrixXd hidden_weights;  // D x h
  Eigen::VectorXd hidden_bias;     // h
  Eigen::VectorXd out_weights;     // h
  double out_bias = 0.0;
};

/// Trainable parameters of the lattice RNN.
struct NetworkParams {
  Arch arch = Arch::kBidirectional;
  ModelDims dims;
  DirectionParams forward;
  std::optional<DirectionParams> backward;  // present iff bidirectional
  HeadParams head;

  int embedding_dim() const {
    return (arch == Arch::kBidirectional ? 2 : 1) * dims.state_dim;
  }

  static NetworkParams zeros(Arch arch, const ModelDims& dims) {
    if (dims.input_dim < 1 || dims.state_dim < 1 || dims.hidden_dim < 1)
      throw ConfigError("network dimensions must be >= 1");
    NetworkParams p;
    p.arch = arch;
    p.dims = dims;
    auto direction = [&] {
      return DirectionParams{Eigen::MatrixXd::Zero(dims.input_dim, dims.state_dim),
                             Eigen::MatrixXd::Zero(dims.state_dim, dims.state_dim),
                             Eigen::VectorXd::Zero(dims.state_dim)};
    };
    p.forward = direction();
    if (arch == Arch::kBidirectional) p.backward = direction();
    p.head.hidden_weights = Eigen::MatrixXd::Zero(p.embedding_dim(), dims.hidden_dim);
    p.head.hidden_bias = Eigen::VectorXd::Zero(dims.hidden_dim);
    p.head.out_weights = Eigen::VectorXd::Zero(dims.hidden_dim);
    return p;
  }

  /// Calls f(name, map) on every tensor in a fixed order. The scalar output
  /// bias is exposed as a 1x1 map.
  template <typename F>
  void for_each_tensor(F&& f) {
    auto m = [](auto& x) { return Eigen::Map<Eigen::MatrixXd>(x.data(), x.rows(), x.cols()); };
    f("forward.input_weights", m(forward.input_weights));
    f("forward.state_weights", m(forward.state_weights));
    f("forward.bias", m(forward.bias));
    if (backward) {
      f("backward.input_weights", m(backward->input_weights));
      f("backward.state_weights", m(backward->state_weights));
      f("backward.bias", m(backward->bias));
    }
    f("head.hidden_weights", m(head.hidden_weights));
    f("head.hidden_bias", m(head.hidden_bias));
    f("head.out_weights", m(head.out_weights));
    f("head.out_bias", Eigen::Map<Eigen::MatrixXd>(&head.out_bias, 1, 1));
  }
  template <typename F>
  void for_each_tensor(F&& f) const {
    const_cast<NetworkParams*>(this)->for_each_tensor(
        [&](const char* name, Eigen::Map<Eigen::MatrixXd> t) {
          f(name, Eigen::Map<const Eigen::MatrixXd>(t.data(), t.rows(), t.cols()));
        });
  }

  long size() const {
    long n = 0;
    for_each_tensor([&](const char*, const auto& t) { n += static_cast<long>(t.size()); });
    return n;
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd out(size());
    Eigen::Index at = 0;
    for_each_tensor([&](const char*, const auto& t) {
      out.segment(at, t.size()) = t.reshaped();
      at += t.size();
    });
    return out;
  }

  void unflatten(const Eigen::VectorXd& flat) {
    if (flat.size() != size()) throw ConfigError("flat parameter vector has wrong size");
    Eigen::Index at = 0;
    for_each_tensor([&](const char*, Eigen::Map<Eigen::MatrixXd> t) {
      t.reshaped() = flat.segment(at, t.size());
      at += t.size();
    });
  }

  /// Throws DataError naming the first tensor whose shape disagrees with
  /// the declared dimensions.
  void check_shapes() const {
    auto expect = [](const char* name, const auto& t, Eigen::Index r, Eigen::Index c) {
      if (t.rows() != r || t.cols() != c)
        throw DataError(std::string("tensor '") + name + "' has shape " + std::to_string(t.rows()) +
                        "x" + std::to_string(t.cols()) + ", expected " + std::to_string(r) + "x" +
                        std::to_string(c));
    };
    const int i = dims.input_dim, d = dims.state_dim, h = dims.hidden_dim;
    if ((arch == Arch::kBidirectional) != backward.has_value())
      throw DataError("backward direction parameters must be present iff bidirectional");
    expect("forward.input_weights", forward.input_weights, i, d);
    expect("forward.state_weights", forward.state_weights, d, d);
    expect("forward.bias", forward.bias, d, 1);
    if (backward) {
      expect("backward.input_weights", backward->input_weights, i, d);
      expect("backward.state_weights", backward->state_weights, d, d);
      expect("backward.bias", backward->bias, d, 1);
    }
    expect("head.hidden_weights", head.hidden_weights, embedding_dim(), h);
    expect("head.hidden_bias", head.hidden_bias, h, 1);
    expect("head.out_weights", head.out_weights, h, 1);
  }
};

/// Uniform(-r, r) initialization with r = 1/sqrt(fan-in) per layer.
inline NetworkParams init_network(Arch arch, const ModelDims& dims, std::uint64_t seed) {
  NetworkParams p = NetworkParams::zeros(arch, dims);
  std::mt19937_64 rng(seed);
  const double r_rec = 1.0 / std::sqrt(static_cast<double>(dims.input_dim + dims.state_dim));
  const double r_hidden = 1.0 / std::sqrt(static_cast<double>(p.embedding_dim()));
  const double r_out = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
  p.for_each_tensor([&](const char* name, Eigen::Map<Eigen::MatrixXd> t) {
    const std::string n = name;
    const double r = n.rfind("head.out", 0) == 0 ? r_out : n.rfind("head.", 0) == 0 ? r_hidden : r_rec;
    std::uniform_real_distribution<double> dist(-r, r);
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = dist(rng);
  });
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass

enum class Direction { kForward, kBackward };

/// Emitted in evaluation order when an observer is attached to forward_pass.
struct PassEvent {
  Direction direction;
  bool is_arc;     // arc state computed, otherwise node state pooled
  std::size_t id;  // arc index or node id
};

using PassObserver = std::function<void(const PassEvent&)>;

struct LatticeStates {
  Eigen::MatrixXd arc_forward;    // d x arcs
  Eigen::MatrixXd node_forward;   // d x nodes
  Eigen::MatrixXd arc_backward;   // d x arcs, empty when unidirectional
  Eigen::MatrixXd node_backward;  // d x nodes, empty when unidirectional
  Eigen::VectorXd embedding;      // h_lat
  Eigen::VectorXd hidden;         // head activations
  double logit = 0.0;
  double score = 0.5;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace detail {

// Runs one direction. `forward` follows arcs source->dest; otherwise the
// lattice is traversed from the terminal node against arc direction.
inline void propagate(const Topology& topo, const Eigen::MatrixXd& projected,
                      const DirectionParams& p, bool forward, Eigen::MatrixXd& arc_states,
                      Eigen::MatrixXd& node_states, const PassObserver* observer) {
  const Lattice& lat = topo.lattice();
  const Eigen::Index d = p.bias.size();
  arc_states.resize(d, static_cast<Eigen::Index>(topo.num_arcs()));
  node_states.resize(d, static_cast<Eigen::Index>(topo.num_nodes()));
  const Direction dir = forward ? Direction::kForward : Direction::kBackward;
  const NodeId seed = forward ? topo.initial() : topo.terminal();
  Eigen::VectorXd recurrent(d);

  auto visit = [&](NodeId n) {
    const auto& pooled = forward ? topo.incoming(n) : topo.outgoing(n);
    if (n == seed) {
      node_states.col(n).setZero();
    } else {
      auto col = node_states.col(n);
      col.setZero();
      for (std::size_t e : pooled) col += arc_states.col(static_cast<Eigen::Index>(e));
      col /= static_cast<double>(pooled.size());
    }
    if (observer && *observer) (*observer)({dir, false, n});
    recurrent.noalias() = p.state_weights.transpose() * node_states.col(n);
    for (std::size_t e : forward ? topo.outgoing(n) : topo.incoming(n)) {
      const auto ei = static_cast<Eigen::Index>(e);
      arc_states.col(ei) = (projected.col(ei) + recurrent).array().tanh();
      if (observer && *observer) (*observer)({dir, true, e});
    }
  };
  if (forward)
    for (NodeId n : topo.order()) visit(n);
  else
    for (auto it = topo.order().rbegin(); it != topo.order().rend(); ++it) visit(*it);
  (void)lat;
}

inline void check_inputs(const Topology& topo, const Eigen::Ref<const Eigen::MatrixXd>& features,
                         const NetworkParams& params) {
  params.check_shapes();
  if (features.rows() != params.dims.input_dim)
    throw DataError("tensor 'features' has " + std::to_string(features.rows()) +
                    " rows, expected input_dim " + std::to_string(params.dims.input_dim));
  if (features.cols() != static_cast<Eigen::Index>(topo.num_arcs()))
    throw DataError("tensor 'features' has " + std::to_string(features.cols()) +
                    " columns, lattice has " + std::to_string(topo.num_arcs()) + " arcs");
}

}  // namespace detail

/// Runs the network on one lattice. `features` has one (normalized) column
/// per arc.
inline LatticeStates forward_pass(const Topology& topo,
                                  const Eigen::Ref<const Eigen::MatrixXd>& features,
                                  const NetworkParams& params,
                                  const PassObserver& observer = {}) {
  detail::check_inputs(topo, features, params);
  LatticeStates st;
  const int d = params.dims.state_dim;

  Eigen::MatrixXd projected = params.forward.input_weights.transpose() * features;
  projected.colwise() += params.forward.bias;
  detail::propagate(topo, projected, params.forward, true, st.arc_forward, st.node_forward,
                    &observer);

  st.embedding.resize(params.embedding_dim());
  st.embedding.head(d) = st.node_forward.col(topo.terminal());
  if (params.backward) {
    projected.noalias() = params.backward->input_weights.transpose() * features;
    projected.colwise() += params.backward->bias;
    detail::propagate(topo, projected, *params.backward, false, st.arc_backward,
                      st.node_backward, &observer);
    st.embedding.tail(d) = st.node_backward.col(topo.initial());
  }

  st.hidden = (params.head.hidden_weights.transpose() * st.embedding + params.head.hidden_bias)
                  .array()
                  .tanh();
  st.logit = params.head.out_weights.dot(st.hidden) + params.head.out_bias;
  st.score = sigmoid(st.logit);
  return st;
}

inline LatticeStates forward_pass(const Lattice& lat,
                                  const Eigen::Ref<const Eigen::MatrixXd>& features,
                                  const NetworkParams& params) {
  return forward_pass(Topology(lat), features, params);
}

// ---------------------------------------------------------------------------
// Backpropagation

/// Binary cross-entropy of sigmoid(logit) against label y, from the logit.
inline double bce_from_logit(double logit, double y) {
  const double softplus = std::max(logit, 0.0) + std::log1p(std::exp(-std::abs(logit)));
  return softplus - y * logit;
}

namespace detail {

// Accumulates gradients of one direction given d(loss)/d(seed-side node state)
// at `grad_node`, the node whose state enters the embedding.
inline void backprop_direction(const Topology& topo, const Eigen::Ref<const Eigen::MatrixXd>& x,
                               const DirectionParams& p, bool forward,
                               const Eigen::MatrixXd& arc_states,
                               const Eigen::MatrixXd& node_states,
                               const Eigen::VectorXd& embed_grad, DirectionParams& g) {
  const Lattice& lat = topo.lattice();
  const Eigen::Index d = p.bias.size();
  Eigen::MatrixXd node_grad = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(topo.num_nodes()));
  Eigen::MatrixXd pre_grad(d, static_cast<Eigen::Index>(topo.num_arcs()));
  node_grad.col(forward ? topo.terminal() : topo.initial()) = embed_grad;
  Eigen::VectorXd sum(d);

  // Node n feeds the arcs leaving it (forward) or entering it (backward).
  // Those arcs pass into nodes visited earlier in this reverse sweep.
  auto visit = [&](NodeId n) {
    const auto& fed = forward ? topo.outgoing(n) : topo.incoming(n);
    if (fed.empty()) return;
    sum.setZero();
    for (std::size_t e : fed) {
      const auto ei = static_cast<Eigen::Index>(e);
      const NodeId pooled = forward ? lat.arcs[e].dest : lat.arcs[e].source;
      const auto fan = forward ? topo.incoming(pooled).size() : topo.outgoing(pooled).size();
      pre_grad.col(ei) = (node_grad.col(pooled) / static_cast<double>(fan)).array() *
                         (1.0 - arc_states.col(ei).array().square());
      sum += pre_grad.col(ei);
    }
    g.state_weights.noalias() += node_states.col(n) * sum.transpose();
    node_grad.col(n).noalias() += p.state_weights * sum;
  };
  if (forward)
    for (auto it = topo.order().rbegin(); it != topo.order().rend(); ++it) visit(*it);
  else
    for (NodeId n : topo.order()) visit(n);

  g.input_weights.noalias() += x * pre_grad.transpose();
  g.bias += pre_grad.rowwise().sum();
}

}  // namespace detail

/// Loss for one lattice and its gradient, accumulated into `grad` (which
/// must have the shape of `params`). Returns the loss.
inline double accumulate_gradient(const Topology& topo,
                                  const Eigen::Ref<const Eigen::MatrixXd>& features,
                                  const NetworkParams& params, double label,
                                  NetworkParams& grad) {
  const LatticeStates st = forward_pass(topo, features, params);
  const double loss = bce_from_logit(st.logit, label);
  const int d = params.dims.state_dim;

  const double d_logit = st.score - label;
  grad.head.out_bias += d_logit;
  grad.head.out_weights += d_logit * st.hidden;
  const Eigen::VectorXd d_hidden =
      (d_logit * params.head.out_weights).array() * (1.0 - st.hidden.array().square());
  grad.head.hidden_weights.noalias() += st.embedding * d_hidden.transpose();
  grad.head.hidden_bias += d_hidden;
  const Eigen::VectorXd d_embed = params.head.hidden_weights * d_hidden;

  detail::backprop_direction(topo, features, params.forward, true, st.arc_forward,
                             st.node_forward, d_embed.head(d), grad.forward);
  if (params.backward)
    detail::backprop_direction(topo, features, *params.backward, false, st.arc_backward,
                               st.node_backward, d_embed.tail(d), *grad.backward);
  return loss;
}

struct Gradient {
  double loss = 0.0;
  NetworkParams grad;
};

/// Binary cross-entropy loss of one lattice and its exact gradient.
inline Gradient backprop(const Topology& topo, const Eigen::Ref<const Eigen::MatrixXd>& features,
                         const NetworkParams& params, double label) {
  Gradient g{0.0, NetworkParams::zeros(params.arch, params.dims)};
  g.loss = accumulate_gradient(topo, features, params, label, g.grad);
  return g;
}

// ---------------------------------------------------------------------------
// Training

/// One training lattice with normalized features. Refers to a Lattice that
/// must outlive it.
struct Example {
  Topology topology;
  ArcFeatures features;
  double label = 0.0;
};

struct TrainConfig {
  Arch arch = Arch::kBidirectional;
  ModelDims dims;
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

struct TrainingLog {
  double initial_loss = 0.0;       // mean loss before the first update
  std::vector<double> epoch_loss;  // mean loss after each epoch
};

/// Summed loss over the batch; its gradient is accumulated into `grad`.
inline double batch_gradient(const std::vector<Example>& examples,
                             std::span<const std::size_t> batch, const NetworkParams& params,
                             NetworkParams& grad) {
  double loss = 0.0;
  for (std::size_t i : batch)
    loss += accumulate_gradient(examples[i].topology, examples[i].features, params,
                                examples[i].label, grad);
  return loss;
}

inline double mean_loss(const std::vector<Example>& examples, const NetworkParams& params) {
  double total = 0.0;
  for (const auto& ex : examples)
    total += bce_from_logit(forward_pass(ex.topology, ex.features, params).logit, ex.label);
  return examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
}

struct TrainedNetwork {
  NetworkParams params;
  TrainingLog log;
};

/// Mini-batch Adam on summed binary cross-entropy. Example order is
/// reshuffled every epoch from the seeded generator, so a run is a pure
/// function of (examples, config).
inline TrainedNetwork train_network(const std::vector<Example>& examples,
                                    const TrainConfig& config,
                                    const std::function<void(int, double)>& on_epoch = {}) {
  bool has_pos = false, has_neg = false;
  for (const auto& ex : examples) (ex.label > 0.5 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw ConfigError("training corpus must contain both labels");
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (config.epochs < 0) throw ConfigError("negative epoch count");

  TrainedNetwork out;
  out.params = init_network(config.arch, config.dims, config.seed);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);

  Eigen::VectorXd theta = out.params.flatten();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  NetworkParams grad = NetworkParams::zeros(config.arch, config.dims);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;

  out.log.initial_loss = mean_loss(examples, out.params);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len = std::min<std::size_t>(config.batch_size, order.size() - at);
      grad.unflatten(Eigen::VectorXd::Zero(theta.size()));
      batch_gradient(examples, std::span(order).subspan(at, len), out.params, grad);
      const Eigen::VectorXd g = grad.flatten();
      ++step;
      m = config.beta1 * m + (1.0 - config.beta1) * g;
      v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      theta.array() -= config.learning_rate * (m.array() / c1) /
                       ((v.array() / c2).sqrt() + config.adam_epsilon);
      out.params.unflatten(theta);
    }
    out.log.epoch_loss.push_back(mean_loss(examples, out.params));
    if (on_epoch) on_epoch(epoch, out.log.epoch_loss.back());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Self-contained model: network plus everything needed to compute features.

struct ModelParams {
  NetworkParams network;
  NormStats norm;
  AutoencoderParams ae;
  Vocabulary vocab;
  TriggerPhrase trigger;
};

/// Features of `lat` normalized with the model's statistics.
inline ArcFeatures model_features(const FeatureExtractor& fx, const NormStats& norm,
                                  const Lattice& lat) {
  ArcFeatures f = fx.extract(lat);
  apply_norm(f, norm);
  return f;
}

inline std::vector<Example> make_examples(const std::vector<Lattice>& corpus,
                                          const FeatureExtractor& fx, const NormStats& norm) {
  std::vector<Example> out;
  out.reserve(corpus.size());
  for (const auto& lat : corpus) {
    if (!lat.label) throw DataError("lattice '" + lat.utterance_id + "' has no label");
    out.push_back({Topology(lat), model_features(fx, norm, lat), *lat.label ? 1.0 : 0.0});
  }
  return out;
}

struct TrainedModel {
  ModelParams model;
  TrainingLog log;
};

/// Fits normalization on `corpus` (unless `norm` is given), then trains the
/// network.
inline TrainedModel train_model(const std::vector<Lattice>& corpus, const Vocabulary& vocab,
                                const AutoencoderParams& ae, const TriggerPhrase& trigger,
                                const TrainConfig& config,
                                const std::optional<NormStats>& norm = std::nullopt,
                                const std::function<void(int, double)>& on_epoch = {}) {
  const FeatureExtractor fx(vocab, ae, trigger);
  NormStats stats;
  if (norm) {
    stats = *norm;
  } else {
    std::vector<ArcFeatures> raw;
    raw.reserve(corpus.size());
    for (const auto& lat : corpus) raw.push_back(fx.extract(lat));
    stats = fit_norm_stats(raw);
  }
  TrainConfig cfg = config;
  cfg.dims.input_dim = kFeatureDim;
  const auto examples = make_examples(corpus, fx, stats);
  auto trained = train_network(examples, cfg, on_epoch);
  return {ModelParams{std::move(trained.params), stats, ae, vocab, trigger}, trained.log};
}

/// Scores every lattice, preserving input order. `jobs` > 1 splits the
/// corpus into contiguous shards scored on separate threads.
inline std::vector<ScoredUtterance> score_corpus(const std::vector<Lattice>& corpus,
                                                 const ModelParams& model, int jobs = 1) {
  const FeatureExtractor fx(model.vocab, model.ae, model.trigger);
  std::vector<ScoredUtterance> out(corpus.size());
  auto score_one = [&](std::size_t i) {
    const Lattice& lat = corpus[i];
    try {
      const Topology topo(lat);
      const auto f = model_features(fx, model.norm, lat);
      out[i] = {lat.utterance_id, forward_pass(topo, f, model.network).score, lat.label};
    } catch (const DataError& e) {
      throw DataError("utterance '" + lat.utterance_id + "': " + e.what());
    }
  };
  const std::size_t n_jobs =
      std::clamp<std::size_t>(jobs < 1 ? 1 : static_cast<std::size_t>(jobs), 1,
                              std::max<std::size_t>(corpus.size(), 1));
  if (n_jobs == 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) score_one(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(n_jobs);
  std::vector<std::thread> workers;
  const std::size_t chunk = (corpus.size() + n_jobs - 1) / n_jobs;
  for (std::size_t j = 0; j < n_jobs; ++j) {
    workers.emplace_back([&, j] {
      try {
        for (std::size_t i = j * chunk; i < std::min(corpus.size(), (j + 1) * chunk); ++i)
          score_one(i);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Model file

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json direction_to_json(const DirectionParams& p) {
  nlohmann::ordered_json j;
  j["input_weights"] = matrix_to_json(p.input_weights);
  j["state_weights"] = matrix_to_json(p.state_weights);
  j["bias"] = vector_to_json(p.bias);
  return j;
}

template <typename Json>
DirectionParams direction_from_json(const Json& j, const ModelDims& dims) {
  return {matrix_from_json(j, "input_weights", dims.input_dim, dims.state_dim),
          matrix_from_json(j, "state_weights", dims.state_dim, dims.state_dim),
          vector_from_json(j, "bias", dims.state_dim)};
}

template <typename Json>
int positive_int(const Json& j, const char* name) {
  const auto& v = json_field(j, name);
  if (!v.is_number_integer() || v.template get<long>() < 1)
    throw FormatError(std::string("field '") + name + "': expected a positive integer");
  return v.template get<int>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ModelParams& model) {
  const auto& net = model.network;
  nlohmann::ordered_json j;
  j["version"] = kModelFormatVersion;
  j["arch"] = arch_name(net.arch);
  j["input_dim"] = net.dims.input_dim;
  j["state_dim"] = net.dims.state_dim;
  j["hidden_dim"] = net.dims.hidden_dim;
  j["forward"] = detail::direction_to_json(net.forward);
  if (net.backward) j["backward"] = detail::direction_to_json(*net.backward);
  nlohmann::ordered_json head;
  head["hidden_weights"] = detail::matrix_to_json(net.head.hidden_weights);
  head["hidden_bias"] = detail::vector_to_json(net.head.hidden_bias);
  head["out_weights"] = detail::vector_to_json(net.head.out_weights);
  head["out_bias"] = net.head.out_bias;
  j["head"] = std::move(head);
  j["norm"] = to_json(model.norm);
  j["autoencoder"] = to_json(model.ae);
  j["trigger"] = model.trigger.words;
  auto vocab = nlohmann::ordered_json::array();
  for (WordId w = 0; w < model.vocab.size(); ++w) {
    std::vector<unsigned> pron(model.vocab.pronunciation(w).begin(),
                               model.vocab.pronunciation(w).end());
    vocab.push_back({model.vocab.word(w), pron});
  }
  j["vocabulary"] = std::move(vocab);
  return j;
}

template <typename Json>
ModelParams model_from_json(const Json& j) {
  detail::check_version(j, kModelFormatVersion, "model");
  ModelParams m;
  auto& net = m.network;
  const auto& arch = detail::json_field(j, "arch");
  if (!arch.is_string()) throw FormatError("field 'arch': expected a string");
  net.arch = parse_arch(arch.template get<std::string>());
  net.dims = {detail::positive_int(j, "input_dim"), detail::positive_int(j, "state_dim"),
              detail::positive_int(j, "hidden_dim")};
  net.forward = detail::direction_from_json(detail::json_field(j, "forward"), net.dims);
  if (net.arch == Arch::kBidirectional)
    net.backward = detail::direction_from_json(detail::json_field(j, "backward"), net.dims);
  const auto& head = detail::json_field(j, "head");
  net.head.hidden_weights =
      detail::matrix_from_json(head, "hidden_weights", net.embedding_dim(), net.dims.hidden_dim);
  net.head.hidden_bias = detail::vector_from_json(head, "hidden_bias", net.dims.hidden_dim);
  net.head.out_weights = detail::vector_from_json(head, "out_weights", net.dims.hidden_dim);
  const auto& ob = detail::json_field(head, "out_bias");
  if (!ob.is_number()) throw FormatError("field 'out_bias': expected a number");
  net.head.out_bias = ob.template get<double>();
  m.norm = norm_stats_from_json(detail::json_field(j, "norm"));
  m.ae = autoencoder_from_json(detail::json_field(j, "autoencoder"));
  for (const auto& entry : detail::json_field(j, "vocabulary")) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() || !entry[1].is_array())
      throw FormatError("field 'vocabulary': expected [word, [phones]] entries");
    Pronunciation pron;
    for (const auto& p : entry[1]) {
      if (!p.is_number_unsigned() || p.template get<unsigned>() >= kNumPhones)
        throw FormatError("field 'vocabulary': bad phone id");
      pron.push_back(static_cast<PhoneId>(p.template get<unsigned>()));
    }
    m.vocab.add(entry[0].template get<std::string>(), std::move(pron));
  }
  std::vector<WordId> trigger;
  for (const auto& w : detail::json_field(j, "trigger")) {
    if (!w.is_number_unsigned() || w.template get<WordId>() >= m.vocab.size())
      throw FormatError("field 'trigger': bad word id");
    trigger.push_back(w.template get<WordId>());
  }
  m.trigger = TriggerPhrase(std::move(trigger));
  net.check_shapes();
  return m;
}

}  // namespace vtl
