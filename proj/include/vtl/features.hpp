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

// Arc features for the lattice RNN.
//
// Layout of the 19-dimensional arc vector:
//   [0]      acoustic log-score
//   [1]      transition (language model) log-score
//   [2]      number of frames, end_frame - start_frame
//   [3]      1 if the word is the first trigger word
//   [4]      1 if the word is the second trigger word
//   [5..18]  14-dim phone encoding from the bag-of-phones autoencoder

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "vtl/error.hpp"
#include "vtl/lattice.hpp"
#include "vtl/vocabulary.hpp"

namespace vtl {

inline constexpr int kPhoneCodeDim = 14;
inline constexpr int kFeatureDim = 19;
inline constexpr int kPhoneCodeOffset = 5;
inline constexpr double kStdFloor = 1e-6;

using PhoneCode = Eigen::Matrix<double, kPhoneCodeDim, 1>;
using FeatureVector = Eigen::Matrix<double, kFeatureDim, 1>;
// One column per arc, indexed like Lattice::arcs.
using ArcFeatures = Eigen::Matrix<double, kFeatureDim, Eigen::Dynamic>;

namespace feature {
inline constexpr int kAcoustic = 0;
inline constexpr int kTransition = 1;
inline constexpr int kFrames = 2;
inline constexpr int kTriggerWord1 = 3;
inline constexpr int kTriggerWord2 = 4;
}  // namespace feature

struct PhoneBag {
  std::array<std::uint8_t, kNumPhones> bits{};

  Eigen::VectorXd as_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(kNumPhones));
    for (std::size_t i = 0; i < kNumPhones; ++i) v[static_cast<Eigen::Index>(i)] = bits[i];
    return v;
  }
  friend bool operator==(const PhoneBag&, const PhoneBag&) = default;
};

inline PhoneBag phone_bag(const Pronunciation& pron) {
  PhoneBag bag;
  for (PhoneId p : pron) bag.bits.at(p) = 1;
  return bag;
}

/// Binary phone-occurrence vector of a word. Epsilon has the empty bag.
inline PhoneBag phone_bag(WordId word, const Vocabulary& vocab) {
  if (word == kEpsilon) return {};
  if (!vocab.contains(word))
    throw DataError("no pronunciation for word id " + std::to_string(word));
  return phone_bag(vocab.pronunciation(word));
}

// ---------------------------------------------------------------------------
// Bag-of-phones autoencoder: tanh encoder to 14 dims, sigmoid decoder back to
// 51, trained by full-batch gradient descent on mean per-bit cross-entropy.

struct AutoencoderParams {
  Eigen::MatrixXd encoder_weights;  // 51 x 14
  Eigen::VectorXd encoder_bias;     // 14
  Eigen::MatrixXd decoder_weights;  // 14 x 51
  Eigen::VectorXd decoder_bias;     // 51

  static AutoencoderParams zeros() {
    const auto n = static_cast<Eigen::Index>(kNumPhones);
    return {Eigen::MatrixXd::Zero(n, kPhoneCodeDim), Eigen::VectorXd::Zero(kPhoneCodeDim),
            Eigen::MatrixXd::Zero(kPhoneCodeDim, n), Eigen::VectorXd::Zero(n)};
  }

  void check_shapes() const {
    const auto n = static_cast<Eigen::Index>(kNumPhones);
    if (encoder_weights.rows() != n || encoder_weights.cols() != kPhoneCodeDim ||
        encoder_bias.size() != kPhoneCodeDim || decoder_weights.rows() != kPhoneCodeDim ||
        decoder_weights.cols() != n || decoder_bias.size() != n)
      throw DataError("autoencoder parameters have wrong shapes");
  }

  friend bool operator==(const AutoencoderParams& a, const AutoencoderParams& b) {
    return a.encoder_weights == b.encoder_weights && a.encoder_bias == b.encoder_bias &&
           a.decoder_weights == b.decoder_weights && a.decoder_bias == b.decoder_bias;
  }
};

inline PhoneCode encode_phones(const PhoneBag& bag, const AutoencoderParams& ae) {
  PhoneCode code = ae.encoder_bias;
  for (std::size_t i = 0; i < kNumPhones; ++i)
    if (bag.bits[i]) code += ae.encoder_weights.row(static_cast<Eigen::Index>(i)).transpose();
  return code.array().tanh().matrix();
}

struct AutoencoderConfig {
  std::uint64_t seed = 1;
  int epochs = 2000;
  double learning_rate = 1.0;
};

struct AutoencoderTraining {
  AutoencoderParams params;
  // Loss before each accepted step, then the final loss; non-increasing.
  std::vector<double> loss_history;
};

namespace detail {

// Mean per-bit binary cross-entropy of the reconstruction, computed from
// logits for stability.
inline double ae_loss_and_grad(const AutoencoderParams& p, const Eigen::MatrixXd& bits,
                               AutoencoderParams* grad) {
  const auto n = static_cast<double>(bits.rows() * bits.cols());
  const Eigen::MatrixXd code =
      ((bits * p.encoder_weights).rowwise() + p.encoder_bias.transpose()).array().tanh();
  const Eigen::MatrixXd logits =
      (code * p.decoder_weights).rowwise() + p.decoder_bias.transpose();
  // softplus(z) - y*z
  const Eigen::ArrayXXd z = logits.array();
  const Eigen::ArrayXXd softplus = z.max(0.0) + (-z.abs()).exp().log1p();
  const double loss = (softplus - bits.array() * z).sum() / n;
  if (grad) {
    const Eigen::MatrixXd recon = (1.0 / (1.0 + (-z).exp())).matrix();
    const Eigen::MatrixXd d_logits = (recon - bits) / n;
    grad->decoder_weights = code.transpose() * d_logits;
    grad->decoder_bias = d_logits.colwise().sum().transpose();
    const Eigen::MatrixXd d_code =
        ((d_logits * p.decoder_weights.transpose()).array() * (1.0 - code.array().square()))
            .matrix();
    grad->encoder_weights = bits.transpose() * d_code;
    grad->encoder_bias = d_code.colwise().sum().transpose();
  }
  return loss;
}

inline void uniform_fill(Eigen::Ref<Eigen::MatrixXd> m, double r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-r, r);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = dist(rng);
}

}  // namespace detail

/// Trains on every non-epsilon word's bag of phones. Each step must not
/// increase the loss; the first step that would stops training with the best
/// parameters seen.
inline AutoencoderTraining train_autoencoder(const Vocabulary& vocab,
                                             const AutoencoderConfig& config = {}) {
  if (vocab.empty()) throw ConfigError("autoencoder: empty vocabulary");
  std::vector<PhoneBag> bags;
  for (WordId w = 1; w < vocab.size(); ++w)
    if (!vocab.pronunciation(w).empty()) bags.push_back(phone_bag(w, vocab));
  if (bags.empty()) throw ConfigError("autoencoder: vocabulary has no pronunciations");
  if (config.epochs < 0) throw ConfigError("autoencoder: negative epoch count");

  const auto n_phones = static_cast<Eigen::Index>(kNumPhones);
  Eigen::MatrixXd bits(static_cast<Eigen::Index>(bags.size()), n_phones);
  for (std::size_t r = 0; r < bags.size(); ++r)
    bits.row(static_cast<Eigen::Index>(r)) = bags[r].as_vector().transpose();

  std::mt19937_64 rng(config.seed);
  AutoencoderParams p = AutoencoderParams::zeros();
  const double enc_r = 1.0 / std::sqrt(static_cast<double>(kNumPhones));
  const double dec_r = 1.0 / std::sqrt(static_cast<double>(kPhoneCodeDim));
  detail::uniform_fill(p.encoder_weights, enc_r, rng);
  detail::uniform_fill(p.encoder_bias, enc_r, rng);
  detail::uniform_fill(p.decoder_weights, dec_r, rng);
  detail::uniform_fill(p.decoder_bias, dec_r, rng);

  AutoencoderTraining out;
  AutoencoderParams grad = AutoencoderParams::zeros();
  double loss = detail::ae_loss_and_grad(p, bits, &grad);
  out.loss_history.push_back(loss);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    AutoencoderParams next = p;
    next.encoder_weights -= config.learning_rate * grad.encoder_weights;
    next.encoder_bias -= config.learning_rate * grad.encoder_bias;
    next.decoder_weights -= config.learning_rate * grad.decoder_weights;
    next.decoder_bias -= config.learning_rate * grad.decoder_bias;
    AutoencoderParams next_grad = AutoencoderParams::zeros();
    const double next_loss = detail::ae_loss_and_grad(next, bits, &next_grad);
    if (!(next_loss <= loss)) break;
    p = std::move(next);
    grad = std::move(next_grad);
    loss = next_loss;
    out.loss_history.push_back(loss);
  }
  out.params = std::move(p);
  return out;
}

/// Mean per-bit cross-entropy of the autoencoder on `vocab`'s lexicon.
inline double reconstruction_loss(const AutoencoderParams& ae, const Vocabulary& vocab) {
  std::vector<PhoneBag> bags;
  for (WordId w = 1; w < vocab.size(); ++w)
    if (!vocab.pronunciation(w).empty()) bags.push_back(phone_bag(w, vocab));
  if (bags.empty()) throw ConfigError("vocabulary has no pronunciations");
  Eigen::MatrixXd bits(static_cast<Eigen::Index>(bags.size()),
                       static_cast<Eigen::Index>(kNumPhones));
  for (std::size_t r = 0; r < bags.size(); ++r)
    bits.row(static_cast<Eigen::Index>(r)) = bags[r].as_vector().transpose();
  return detail::ae_loss_and_grad(ae, bits, nullptr);
}

// ---------------------------------------------------------------------------
// Feature extraction

/// Builds arc features for lattices over a fixed vocabulary. Phone codes are
/// computed once per word.
class FeatureExtractor {
 public:
  FeatureExtractor(const Vocabulary& vocab, const AutoencoderParams& ae,
                   const TriggerPhrase& trigger)
      : vocab_size_(vocab.size()) {
    ae.check_shapes();
    codes_.reserve(vocab.size());
    for (WordId w = 0; w < vocab.size(); ++w) codes_.push_back(encode_phones(phone_bag(w, vocab), ae));
    for (std::size_t k = 0; k < trigger.words.size() && k < trigger_slots_.size(); ++k)
      trigger_slots_[k] = trigger.words[k];
  }

  ArcFeatures extract(const Lattice& lat) const {
    ArcFeatures f(kFeatureDim, static_cast<Eigen::Index>(lat.arcs.size()));
    for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
      const Arc& a = lat.arcs[i];
      if (a.word >= vocab_size_)
        throw DataError("lattice '" + lat.utterance_id + "' arc " + std::to_string(i) +
                        ": unknown word id " + std::to_string(a.word));
      auto col = f.col(static_cast<Eigen::Index>(i));
      col[feature::kAcoustic] = a.acoustic_logp;
      col[feature::kTransition] = a.transition_logp;
      col[feature::kFrames] = static_cast<double>(a.end_frame) - static_cast<double>(a.start_frame);
      col[feature::kTriggerWord1] = trigger_slots_[0] && a.word == *trigger_slots_[0] ? 1.0 : 0.0;
      col[feature::kTriggerWord2] = trigger_slots_[1] && a.word == *trigger_slots_[1] ? 1.0 : 0.0;
      col.segment<kPhoneCodeDim>(kPhoneCodeOffset) = codes_[a.word];
    }
    return f;
  }

 private:
  std::size_t vocab_size_;
  std::vector<PhoneCode> codes_;
  std::array<std::optional<WordId>, 2> trigger_slots_{};
};

inline ArcFeatures extract_features(const Lattice& lat, const Vocabulary& vocab,
                                    const AutoencoderParams& ae, const TriggerPhrase& trigger) {
  return FeatureExtractor(vocab, ae, trigger).extract(lat);
}

// ---------------------------------------------------------------------------
// Normalization

struct NormStats {
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kFeatureDim);
  Eigen::VectorXd std = Eigen::VectorXd::Ones(kFeatureDim);

  friend bool operator==(const NormStats& a, const NormStats& b) {
    return a.mean == b.mean && a.std == b.std;
  }
};

/// Per-component mean and population standard deviation over all arcs.
inline NormStats fit_norm_stats(const std::vector<ArcFeatures>& corpus) {
  Eigen::Index total = 0;
  for (const auto& f : corpus) total += f.cols();
  if (total < 2) throw DataError("normalization needs at least 2 arcs, got " + std::to_string(total));
  const double n = static_cast<double>(total);

  NormStats stats;
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(kFeatureDim, std::numeric_limits<double>::infinity());
  Eigen::VectorXd hi = -lo;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(kFeatureDim);
  for (const auto& f : corpus) {
    if (f.cols() == 0) continue;
    sum += f.rowwise().sum();
    lo = lo.cwiseMin(f.rowwise().minCoeff());
    hi = hi.cwiseMax(f.rowwise().maxCoeff());
  }
  Eigen::VectorXd mean = sum / n;
  // Second pass corrects the mean for rounding in the first sum.
  Eigen::VectorXd resid = Eigen::VectorXd::Zero(kFeatureDim);
  for (const auto& f : corpus) resid += (f.colwise() - mean).rowwise().sum();
  mean += resid / n;
  for (int k = 0; k < kFeatureDim; ++k)
    if (lo[k] == hi[k]) mean[k] = lo[k];

  Eigen::VectorXd sq = Eigen::VectorXd::Zero(kFeatureDim);
  for (const auto& f : corpus) sq += (f.colwise() - mean).array().square().matrix().rowwise().sum();
  stats.mean = mean;
  stats.std = (sq / n).cwiseSqrt().cwiseMax(kStdFloor);
  return stats;
}

inline FeatureVector apply_norm(const FeatureVector& x, const NormStats& stats) {
  return ((x - stats.mean).array() / stats.std.array()).matrix();
}

inline void apply_norm(ArcFeatures& f, const NormStats& stats) {
  f = ((f.colwise() - stats.mean).array().colwise() / stats.std.array()).matrix();
}

inline FeatureVector invert_norm(const FeatureVector& z, const NormStats& stats) {
  return (z.array() * stats.std.array()).matrix() + stats.mean;
}

// ---------------------------------------------------------------------------
// JSON documents. Matrices are stored as arrays of rows.

inline constexpr int kAutoencoderFormatVersion = 1;
inline constexpr int kNormStatsFormatVersion = 1;

namespace detail {

inline nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::ordered_json vector_to_json(const Eigen::VectorXd& v) {
  auto out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

template <typename Json>
const Json& json_field(const Json& j, const std::string& name) {
  auto it = j.find(name);
  if (it == j.end()) throw FormatError("missing field '" + name + "'");
  return *it;
}

template <typename Json>
Eigen::MatrixXd matrix_from_json(const Json& j, const std::string& name, Eigen::Index rows,
                                 Eigen::Index cols) {
  const auto& m = json_field(j, name);
  if (!m.is_array() || static_cast<Eigen::Index>(m.size()) != rows)
    throw FormatError("field '" + name + "': expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = m[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw FormatError("field '" + name + "': expected " + std::to_string(cols) + " columns");
    for (Eigen::Index k = 0; k < cols; ++k) {
      const auto& v = row[static_cast<std::size_t>(k)];
      if (!v.is_number()) throw FormatError("field '" + name + "': non-numeric entry");
      out(i, k) = v.template get<double>();
    }
  }
  return out;
}

template <typename Json>
Eigen::VectorXd vector_from_json(const Json& j, const std::string& name, Eigen::Index size) {
  const auto& m = json_field(j, name);
  if (!m.is_array() || static_cast<Eigen::Index>(m.size()) != size)
    throw FormatError("field '" + name + "': expected " + std::to_string(size) + " values");
  Eigen::VectorXd out(size);
  for (Eigen::Index i = 0; i < size; ++i) {
    const auto& v = m[static_cast<std::size_t>(i)];
    if (!v.is_number()) throw FormatError("field '" + name + "': non-numeric entry");
    out[i] = v.template get<double>();
  }
  return out;
}

template <typename Json>
void check_version(const Json& j, int expected, const char* what) {
  const auto& v = json_field(j, "version");
  if (!v.is_number_integer() || v.template get<int>() != expected)
    throw FormatError(std::string(what) + ": unsupported version");
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const AutoencoderParams& ae) {
  nlohmann::ordered_json j;
  j["version"] = kAutoencoderFormatVersion;
  j["input_dim"] = kNumPhones;
  j["code_dim"] = kPhoneCodeDim;
  j["encoder_weights"] = detail::matrix_to_json(ae.encoder_weights);
  j["encoder_bias"] = detail::vector_to_json(ae.encoder_bias);
  j["decoder_weights"] = detail::matrix_to_json(ae.decoder_weights);
  j["decoder_bias"] = detail::vector_to_json(ae.decoder_bias);
  return j;
}

template <typename Json>
AutoencoderParams autoencoder_from_json(const Json& j) {
  detail::check_version(j, kAutoencoderFormatVersion, "autoencoder");
  const auto n = static_cast<Eigen::Index>(kNumPhones);
  AutoencoderParams ae;
  ae.encoder_weights = detail::matrix_from_json(j, "encoder_weights", n, kPhoneCodeDim);
  ae.encoder_bias = detail::vector_from_json(j, "encoder_bias", kPhoneCodeDim);
  ae.decoder_weights = detail::matrix_from_json(j, "decoder_weights", kPhoneCodeDim, n);
  ae.decoder_bias = detail::vector_from_json(j, "decoder_bias", n);
  return ae;
}

inline nlohmann::ordered_json to_json(const NormStats& s) {
  nlohmann::ordered_json j;
  j["version"] = kNormStatsFormatVersion;
  j["dim"] = kFeatureDim;
  j["mean"] = detail::vector_to_json(s.mean);
  j["std"] = detail::vector_to_json(s.std);
  return j;
}

template <typename Json>
NormStats norm_stats_from_json(const Json& j) {
  detail::check_version(j, kNormStatsFormatVersion, "norm stats");
  NormStats s;
  s.mean = detail::vector_from_json(j, "mean", kFeatureDim);
  s.std = detail::vector_from_json(j, "std", kFeatureDim);
  for (Eigen::Index i = 0; i < s.std.size(); ++i)
    if (!(s.std[i] >= kStdFloor)) throw FormatError("norm stats: std below floor");
  return s;
}

}  // namespace vtl
