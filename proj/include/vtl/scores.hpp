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

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "vtl/error.hpp"

namespace vtl {

/// Detector output for one utterance.
struct ScoredUtterance {
  std::string utt;
  double score = 0.0;
  std::optional<bool> label;

  friend bool operator==(const ScoredUtterance&, const ScoredUtterance&) = default;
};

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Scores CSV: header "utt,score,label"; label is 1, 0, or empty when unknown.

inline void write_scores(std::ostream& out, const std::vector<ScoredUtterance>& scores) {
  out << "utt,score,label\n";
  for (const auto& s : scores) {
    if (s.utt.find_first_of(",\n\"") != std::string::npos)
      throw DataError("utterance id '" + s.utt + "' cannot be written to CSV");
    out << s.utt << ',' << format_double(s.score) << ',';
    if (s.label) out << (*s.label ? '1' : '0');
    out << '\n';
  }
}

inline void write_scores(const std::string& path, const std::vector<ScoredUtterance>& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write scores '" + path + "'");
  write_scores(out, scores);
}

inline std::vector<ScoredUtterance> read_scores(std::istream& in) {
  std::vector<ScoredUtterance> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != "utt,score,label") throw FormatError("scores: expected header 'utt,score,label'", 1);
      continue;
    }
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos || line.find(',', c2 + 1) != std::string::npos)
      throw FormatError("scores: expected 3 columns", lineno);
    ScoredUtterance s;
    s.utt = line.substr(0, c1);
    const auto score = parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
    if (!score || !std::isfinite(*score)) throw FormatError("scores: bad 'score' value", lineno);
    s.score = *score;
    const auto label = std::string_view(line).substr(c2 + 1);
    if (label == "1")
      s.label = true;
    else if (label == "0")
      s.label = false;
    else if (!label.empty())
      throw FormatError("scores: 'label' must be 0 or 1", lineno);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<ScoredUtterance> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scores '" + path + "'");
  try {
    return read_scores(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace vtl
