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

// Line-oriented JSON corpus format. Each line is one lattice:
//
//   {"utt":"u1","num_nodes":3,"label":true,
//    "arcs":[[src,dst,word,start,end,acoustic_logp,transition_logp],...]}
//
// Doubles are written in shortest round-trip form, so write/read preserves
// every score bit for bit.

#pragma once

#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vtl/error.hpp"
#include "vtl/lattice.hpp"

namespace vtl {

namespace detail {

inline std::uint32_t json_u32(const nlohmann::json& v, const char* field,
                              std::size_t lineno) {
  if (!v.is_number_unsigned() ||
      v.get<std::uint64_t>() > std::numeric_limits<std::uint32_t>::max())
    throw FormatError(std::string("field '") + field +
                          "': expected a non-negative integer",
                      lineno);
  return static_cast<std::uint32_t>(v.get<std::uint64_t>());
}

inline double json_real(const nlohmann::json& v, const char* field,
                        std::size_t lineno) {
  if (!v.is_number())
    throw FormatError(std::string("field '") + field + "': expected a number",
                      lineno);
  return v.get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json lattice_to_json(const Lattice& lat) {
  nlohmann::ordered_json j;
  j["utt"] = lat.utterance_id;
  j["num_nodes"] = lat.num_nodes;
  if (lat.label)
    j["label"] = *lat.label;
  else
    j["label"] = nullptr;
  auto arcs = nlohmann::ordered_json::array();
  for (const Arc& a : lat.arcs)
    arcs.push_back({a.source, a.dest, a.word, a.start_frame, a.end_frame,
                    a.acoustic_logp, a.transition_logp});
  j["arcs"] = std::move(arcs);
  return j;
}

inline Lattice lattice_from_json(const nlohmann::json& j, std::size_t lineno = 0) {
  if (!j.is_object()) throw FormatError("record is not a JSON object", lineno);
  auto field = [&](const char* name) -> const nlohmann::json& {
    auto it = j.find(name);
    if (it == j.end())
      throw FormatError(std::string("missing field '") + name + "'", lineno);
    return *it;
  };
  Lattice lat;
  const auto& utt = field("utt");
  if (!utt.is_string()) throw FormatError("field 'utt': expected a string", lineno);
  lat.utterance_id = utt.get<std::string>();
  lat.num_nodes = detail::json_u32(field("num_nodes"), "num_nodes", lineno);
  const auto& label = field("label");
  if (label.is_boolean())
    lat.label = label.get<bool>();
  else if (!label.is_null())
    throw FormatError("field 'label': expected true, false or null", lineno);
  const auto& arcs = field("arcs");
  if (!arcs.is_array()) throw FormatError("field 'arcs': expected an array", lineno);
  lat.arcs.reserve(arcs.size());
  for (const auto& rec : arcs) {
    if (!rec.is_array() || rec.size() != 7)
      throw FormatError("field 'arcs': each arc must be a 7-element array", lineno);
    Arc a;
    a.source = detail::json_u32(rec[0], "arcs.source", lineno);
    a.dest = detail::json_u32(rec[1], "arcs.dest", lineno);
    a.word = detail::json_u32(rec[2], "arcs.word_id", lineno);
    a.start_frame = detail::json_u32(rec[3], "arcs.start_frame", lineno);
    a.end_frame = detail::json_u32(rec[4], "arcs.end_frame", lineno);
    a.acoustic_logp = detail::json_real(rec[5], "arcs.acoustic_logp", lineno);
    a.transition_logp = detail::json_real(rec[6], "arcs.transition_logp", lineno);
    lat.arcs.push_back(a);
  }
  return lat;
}

/// Reads every record; blank lines are skipped. Throws FormatError naming the
/// 1-based line and the offending field.
inline std::vector<Lattice> read_corpus(std::istream& in) {
  std::vector<Lattice> corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    corpus.push_back(lattice_from_json(j, lineno));
  }
  return corpus;
}

inline std::vector<Lattice> read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus '" + path + "'");
  try {
    return read_corpus(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_corpus(std::ostream& out, const std::vector<Lattice>& corpus) {
  for (const Lattice& lat : corpus) out << lattice_to_json(lat).dump() << '\n';
}

inline void write_corpus(const std::string& path, const std::vector<Lattice>& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus '" + path + "'");
  write_corpus(out, corpus);
  if (!out) throw DataError("failed writing corpus '" + path + "'");
}

}  // namespace vtl
