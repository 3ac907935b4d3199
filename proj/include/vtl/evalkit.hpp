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

// Detection metrics: miss / false-alarm rates, ROC sweeps, equal error rate,
// operating-point selection and threshold transfer, and the 1-best baseline.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "vtl/error.hpp"
#include "vtl/lattice.hpp"
#include "vtl/scores.hpp"
#include "vtl/vocabulary.hpp"

namespace vtl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct RocPoint {
  double threshold = kInf;
  double p_miss = 1.0;
  double p_fa = 0.0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

enum class SelectionRule { kClosestPm, kEer };

struct OperatingPoint {
  double threshold = kInf;
  double p_miss = 1.0;
  double p_fa = 0.0;
  SelectionRule rule = SelectionRule::kClosestPm;
};

struct ClassCounts {
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

inline ClassCounts count_classes(const std::vector<ScoredUtterance>& scored) {
  ClassCounts c;
  for (const auto& s : scored) {
    if (!s.label) throw DataError("utterance '" + s.utt + "' has no label");
    if (!std::isfinite(s.score)) throw DataError("utterance '" + s.utt + "' has a non-finite score");
    (*s.label ? c.positives : c.negatives)++;
  }
  if (c.positives == 0 || c.negatives == 0)
    throw DataError("evaluation needs both positive and negative utterances");
  return c;
}

/// One point per distinct score plus a leading +inf sentinel, in descending
/// threshold order. An utterance is accepted when score >= threshold.
inline std::vector<RocPoint> roc_sweep(const std::vector<ScoredUtterance>& scored) {
  const ClassCounts c = count_classes(scored);
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(scored.size());
  for (const auto& s : scored) sorted.emplace_back(s.score, *s.label);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  const double np = static_cast<double>(c.positives), nn = static_cast<double>(c.negatives);
  std::vector<RocPoint> roc{{kInf, 1.0, 0.0}};
  std::size_t hits = 0, false_alarms = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].first;
    for (; i < sorted.size() && sorted[i].first == t; ++i) (sorted[i].second ? hits : false_alarms)++;
    roc.push_back({t, static_cast<double>(c.positives - hits) / np,
                   static_cast<double>(false_alarms) / nn});
  }
  return roc;
}

/// Equal error rate of a sweep. Points are taken on the lower convex hull of
/// the (p_fa, p_miss) curve, and the rate is linearly interpolated between
/// the two adjacent hull vertices where p_miss - p_fa changes sign.
inline double eer(const std::vector<RocPoint>& roc) {
  if (roc.empty()) throw Error("eer of an empty sweep");
  // Sweep order already has p_fa non-decreasing and p_miss non-increasing.
  std::vector<std::pair<double, double>> hull;  // (p_fa, p_miss)
  auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
  };
  for (const auto& p : roc) {
    const std::pair<double, double> q{p.p_fa, p.p_miss};
    if (!hull.empty() && hull.back() == q) continue;
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), q) <= 0) hull.pop_back();
    hull.push_back(q);
  }
  auto diff = [](const auto& p) { return p.second - p.first; };
  if (diff(hull.front()) <= 0) return std::clamp(hull.front().second, 0.0, 1.0);
  for (std::size_t i = 1; i < hull.size(); ++i) {
    const double d1 = diff(hull[i]);
    if (d1 > 0) continue;
    const double d0 = diff(hull[i - 1]);
    const double a = d0 / (d0 - d1);
    const double rate = hull[i - 1].second + a * (hull[i].second - hull[i - 1].second);
    return std::clamp(rate, 0.0, 1.0);
  }
  return std::clamp(hull.back().second, 0.0, 1.0);
}

/// Sweep point whose p_miss is closest to `target_pm`; ties go to the lower
/// p_fa, then to the higher threshold.
inline OperatingPoint operating_point_closest_pm(const std::vector<RocPoint>& roc,
                                                 double target_pm) {
  if (roc.empty()) throw Error("operating point of an empty sweep");
  const RocPoint* best = &roc.front();
  for (const auto& p : roc) {
    const double d = std::abs(p.p_miss - target_pm), bd = std::abs(best->p_miss - target_pm);
    if (d < bd || (d == bd && p.p_fa < best->p_fa)) best = &p;
  }
  return {best->threshold, best->p_miss, best->p_fa, SelectionRule::kClosestPm};
}

/// Sweep point where p_miss and p_fa are closest, a real threshold near the
/// equal error rate. Ties go to the smaller of the two rates' maximum, then to
/// the higher threshold.
inline OperatingPoint operating_point_eer(const std::vector<RocPoint>& roc) {
  if (roc.empty()) throw Error("operating point of an empty sweep");
  const RocPoint* best = &roc.front();
  for (const auto& p : roc) {
    const double d = std::abs(p.p_miss - p.p_fa), bd = std::abs(best->p_miss - best->p_fa);
    if (d < bd || (d == bd && std::max(p.p_miss, p.p_fa) < std::max(best->p_miss, best->p_fa))) best = &p;
  }
  return {best->threshold, best->p_miss, best->p_fa, SelectionRule::kEer};
}

struct Rates {
  double p_miss = 0.0;
  double p_fa = 0.0;
};

/// Miss and false-alarm rates at a fixed threshold.
inline Rates apply_threshold(const std::vector<ScoredUtterance>& scored, double threshold) {
  const ClassCounts c = count_classes(scored);
  std::size_t misses = 0, false_alarms = 0;
  for (const auto& s : scored) {
    const bool accept = s.score >= threshold;
    if (*s.label && !accept) ++misses;
    if (!*s.label && accept) ++false_alarms;
  }
  return {static_cast<double>(misses) / static_cast<double>(c.positives),
          static_cast<double>(false_alarms) / static_cast<double>(c.negatives)};
}

// ---------------------------------------------------------------------------
// 1-best baseline

/// Highest-scoring path. Among equal scores the lexicographically smallest
/// arc-index sequence wins.
inline Path best_path(const Topology& topo, double acoustic_scale = 1.0) {
  const Lattice& lat = topo.lattice();
  // Best completion score from each node to the terminal.
  std::vector<double> best(topo.num_nodes(), -kInf);
  std::vector<std::size_t> choice(topo.num_nodes(), 0);
  best[topo.terminal()] = 0.0;
  for (auto it = topo.order().rbegin(); it != topo.order().rend(); ++it) {
    const NodeId n = *it;
    for (std::size_t e : topo.outgoing(n)) {
      const double s = arc_log_score(lat.arcs[e], acoustic_scale) + best[lat.arcs[e].dest];
      if (s > best[n]) {  // outgoing arcs ascend, so strict > keeps the smallest id
        best[n] = s;
        choice[n] = e;
      }
    }
  }
  Path path;
  for (NodeId n = topo.initial(); n != topo.terminal(); n = lat.arcs[choice[n]].dest) {
    path.arcs.push_back(choice[n]);
    path.log_score += arc_log_score(lat.arcs[choice[n]], acoustic_scale);
  }
  return path;
}

/// True if the first non-epsilon words of `words` are exactly the trigger.
inline bool starts_with_trigger(const std::vector<WordId>& words, const TriggerPhrase& trigger) {
  return words.size() >= trigger.size() &&
         std::equal(trigger.words.begin(), trigger.words.end(), words.begin());
}

inline bool baseline_1best(const Topology& topo, const TriggerPhrase& trigger) {
  return starts_with_trigger(path_words(topo.lattice(), best_path(topo)), trigger);
}

inline bool baseline_1best(const Lattice& lat, const TriggerPhrase& trigger) {
  return baseline_1best(Topology(lat), trigger);
}

// ---------------------------------------------------------------------------
// Reports

struct Curve {
  std::string name;
  std::vector<RocPoint> roc;
  std::optional<RocPoint> eer_point;       // drawn as a cross
  std::optional<RocPoint> selected_point;  // drawn as a dot
};

/// Point on the sweep where p_miss = p_fa, for plotting the EER marker.
/// The interpolated equal-error point, for plotting. It has no threshold.
inline RocPoint eer_point(const std::vector<RocPoint>& roc) {
  const double e = eer(roc);
  return {kInf, e, e};
}

inline void write_roc_csv(std::ostream& out, const std::vector<RocPoint>& roc) {
  out << "threshold,p_miss,p_fa\n";
  for (const auto& p : roc)
    out << format_double(p.threshold) << ',' << format_double(p.p_miss) << ','
        << format_double(p.p_fa) << '\n';
}

inline std::vector<RocPoint> read_roc_csv(std::istream& in) {
  std::vector<RocPoint> roc;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) continue;
    if (line.empty()) continue;
    std::vector<double> v;
    std::size_t at = 0;
    while (true) {
      const auto comma = line.find(',', at);
      const auto val = parse_double(std::string_view(line).substr(at, comma - at));
      if (!val) throw FormatError("roc: bad number", lineno);
      v.push_back(*val);
      if (comma == std::string::npos) break;
      at = comma + 1;
    }
    if (v.size() != 3) throw FormatError("roc: expected 3 columns", lineno);
    roc.push_back({v[0], v[1], v[2]});
  }
  return roc;
}

/// SVG plot of P_M against P_FA, one <path> per curve, with circles for the
/// selected operating points and crosses for the EER points.
inline void write_roc_svg(std::ostream& out, const std::vector<Curve>& curves) {
  constexpr double kSize = 400, kMargin = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  auto x = [&](double p_fa) { return kMargin + p_fa * kSize; };
  auto y = [&](double p_miss) { return kMargin + (1.0 - p_miss) * kSize; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  const double full = kSize + 2 * kMargin;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(full) << "\" height=\""
      << num(full) << "\" viewBox=\"0 0 " << num(full) << ' ' << num(full) << "\">\n"
      << "  <rect x=\"" << num(kMargin) << "\" y=\"" << num(kMargin) << "\" width=\"" << num(kSize)
      << "\" height=\"" << num(kSize) << "\" fill=\"none\" stroke=\"black\"/>\n"
      << "  <text x=\"" << num(kMargin + kSize / 2) << "\" y=\"" << num(full - 15)
      << "\" text-anchor=\"middle\">P_FA</text>\n"
      << "  <text x=\"15\" y=\"" << num(kMargin + kSize / 2)
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " << num(kMargin + kSize / 2)
      << ")\">P_M</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& curve = curves[c];
    const char* color = kColors[c % std::size(kColors)];
    out << "  <path class=\"roc\" fill=\"none\" stroke=\"" << color << "\" d=\"";
    for (std::size_t i = 0; i < curve.roc.size(); ++i)
      out << (i ? " L" : "M") << num(x(curve.roc[i].p_fa)) << ',' << num(y(curve.roc[i].p_miss));
    out << "\"/>\n";
    if (curve.eer_point) {
      const double cx = x(curve.eer_point->p_fa), cy = y(curve.eer_point->p_miss);
      out << "  <line class=\"eer\" x1=\"" << num(cx - 5) << "\" y1=\"" << num(cy - 5) << "\" x2=\""
          << num(cx + 5) << "\" y2=\"" << num(cy + 5) << "\" stroke=\"" << color << "\"/>\n"
          << "  <line class=\"eer\" x1=\"" << num(cx - 5) << "\" y1=\"" << num(cy + 5) << "\" x2=\""
          << num(cx + 5) << "\" y2=\"" << num(cy - 5) << "\" stroke=\"" << color << "\"/>\n";
    }
    if (curve.selected_point)
      out << "  <circle class=\"selected\" cx=\"" << num(x(curve.selected_point->p_fa))
          << "\" cy=\"" << num(y(curve.selected_point->p_miss)) << "\" r=\"4\" fill=\"" << color
          << "\"/>\n";
    std::string label;
    for (char ch : curve.name) {
      if (ch == '<') label += "&lt;";
      else if (ch == '>') label += "&gt;";
      else if (ch == '&') label += "&amp;";
      else label += ch;
    }
    out << "  <text x=\"" << num(kMargin + kSize - 10) << "\" y=\""
        << num(kMargin + 20 + 18 * static_cast<double>(c)) << "\" text-anchor=\"end\" fill=\""
        << color << "\">" << label << "</text>\n";
  }
  out << "</svg>\n";
}

/// Writes the sweep CSV of every curve (curve name prefixed when there is
/// more than one) and, if `svg_path` is non-empty, the plot.
inline void emit_report(const std::vector<Curve>& curves, const std::string& csv_path,
                        const std::string& svg_path) {
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + csv_path + "'");
    if (curves.size() == 1) {
      write_roc_csv(out, curves.front().roc);
    } else {
      out << "curve,threshold,p_miss,p_fa\n";
      for (const auto& c : curves)
        for (const auto& p : c.roc)
          out << c.name << ',' << format_double(p.threshold) << ',' << format_double(p.p_miss)
              << ',' << format_double(p.p_fa) << '\n';
    }
    if (!out) throw DataError("failed writing '" + csv_path + "'");
  }
  if (!svg_path.empty()) {
    std::ofstream out(svg_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + svg_path + "'");
    write_roc_svg(out, curves);
    if (!out) throw DataError("failed writing '" + svg_path + "'");
  }
}

}  // namespace vtl
