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

// Network checks shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "support/oracles.hpp"
#include "support/random_lattice.hpp"
#include "vtl/latticernn.hpp"

namespace vtl::testing {

inline Eigen::MatrixXd random_features(std::mt19937_64& rng, int dim, std::size_t arcs) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd f(dim, static_cast<Eigen::Index>(arcs));
  for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = n(rng);
  return f;
}

/// Parameters with every weight uniform in (-r, r), including the output bias.
inline NetworkParams random_params(std::mt19937_64& rng, Arch arch, const ModelDims& dims,
                                   double r = 0.6) {
  NetworkParams p = NetworkParams::zeros(arch, dims);
  Eigen::VectorXd flat(p.size());
  std::uniform_real_distribution<double> u(-r, r);
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = u(rng);
  p.unflatten(flat);
  return p;
}

struct GradCheck {
  double max_rel_error = 0.0;
  long checked = 0;
};

// Relative error with a floor so that gradients that are zero up to
// cancellation noise do not divide by zero.
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

/// Compares every analytic partial derivative with a central difference.
inline GradCheck check_gradient(const Lattice& lat, const Eigen::MatrixXd& features,
                                const NetworkParams& params, double label, double eps = 1e-5) {
  const Topology topo(lat);
  const Gradient g = backprop(topo, features, params, label);
  const Eigen::VectorXd analytic = g.grad.flatten();
  const Eigen::VectorXd theta = params.flatten();
  NetworkParams probe = params;
  GradCheck out;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Eigen::VectorXd t = theta;
    t[k] = theta[k] + eps;
    probe.unflatten(t);
    const double up = bce_from_logit(forward_pass(topo, features, probe).logit, label);
    t[k] = theta[k] - eps;
    probe.unflatten(t);
    const double down = bce_from_logit(forward_pass(topo, features, probe).logit, label);
    const double numeric = (up - down) / (2 * eps);
    out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[k], numeric));
    ++out.checked;
  }
  return out;
}

/// Largest absolute difference between the network on a chain lattice and
/// a plain sequence RNN (bidirectional when `params` is), over every arc
/// state and the output score.
inline double chain_discrepancy(const Lattice& chain_lat, const Eigen::MatrixXd& features,
                                const NetworkParams& params) {
  const LatticeStates st = forward_pass(chain_lat, features, params);
  const std::size_t n = chain_lat.arcs.size();
  std::vector<Eigen::VectorXd> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(features.col(static_cast<Eigen::Index>(i)));
  double worst = 0.0;
  const auto fwd = sequence_rnn(xs, params.forward.input_weights, params.forward.state_weights,
                                params.forward.bias);
  for (std::size_t i = 0; i < n; ++i)
    worst = std::max(worst, (fwd[i] - st.arc_forward.col(static_cast<Eigen::Index>(i))).cwiseAbs().maxCoeff());
  Eigen::VectorXd embedding = fwd.back();
  if (params.backward) {
    std::vector<Eigen::VectorXd> rev(xs.rbegin(), xs.rend());
    const auto bwd = sequence_rnn(rev, params.backward->input_weights,
                                  params.backward->state_weights, params.backward->bias);
    for (std::size_t i = 0; i < n; ++i)
      worst = std::max(worst, (bwd[n - 1 - i] - st.arc_backward.col(static_cast<Eigen::Index>(i)))
                                  .cwiseAbs()
                                  .maxCoeff());
    embedding.conservativeResize(2 * embedding.size());
    embedding.tail(bwd.back().size()) = bwd.back();
  }
  // Head computed with explicit loops.
  double logit = params.head.out_bias;
  for (Eigen::Index j = 0; j < params.head.hidden_bias.size(); ++j) {
    double pre = params.head.hidden_bias[j];
    for (Eigen::Index i = 0; i < embedding.size(); ++i) pre += params.head.hidden_weights(i, j) * embedding[i];
    logit += params.head.out_weights[j] * std::tanh(pre);
  }
  const double score = 1.0 / (1.0 + std::exp(-logit));
  return std::max(worst, std::abs(score - st.score));
}

}  // namespace vtl::testing
