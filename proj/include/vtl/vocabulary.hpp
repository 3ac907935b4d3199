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
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vtl/error.hpp"
#include "vtl/lattice.hpp"

namespace vtl {

inline constexpr std::size_t kNumPhones = 51;

using PhoneId = std::uint8_t;
using Pronunciation = std::vector<PhoneId>;

/// Word list plus a pronunciation per word. Word ids are positions in the
/// list; id 0 is the epsilon/silence token.
class Vocabulary {
 public:
  Vocabulary() = default;

  WordId add(std::string word, Pronunciation pron) {
    if (index_.count(word)) throw DataError("duplicate word '" + word + "'");
    for (PhoneId p : pron)
      if (p >= kNumPhones)
        throw DataError("word '" + word + "': phone id " + std::to_string(p) +
                        " outside inventory of " + std::to_string(kNumPhones));
    const auto id = static_cast<WordId>(words_.size());
    index_.emplace(word, id);
    words_.push_back(std::move(word));
    prons_.push_back(std::move(pron));
    return id;
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  bool contains(WordId id) const { return id < words_.size(); }

  const std::string& word(WordId id) const {
    check(id);
    return words_[id];
  }
  const Pronunciation& pronunciation(WordId id) const {
    check(id);
    return prons_[id];
  }
  std::optional<WordId> find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  WordId id(std::string_view word) const {
    if (auto found = find(word)) return *found;
    throw DataError("unknown word '" + std::string(word) + "'");
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_ && a.prons_ == b.prons_;
  }

 private:
  void check(WordId id) const {
    if (id >= words_.size())
      throw DataError("unknown word id " + std::to_string(id) +
                      " (vocabulary size " + std::to_string(words_.size()) +
                      ")");
  }

  std::vector<std::string> words_;
  std::vector<Pronunciation> prons_;
  std::unordered_map<std::string, WordId> index_;
};

// Vocabulary file: one word per line, "word<TAB>phone phone ...".

inline Vocabulary read_vocabulary(std::istream& in) {
  Vocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw FormatError("vocabulary: expected 'word<TAB>phones'", lineno);
    Pronunciation pron;
    std::istringstream phones(line.substr(tab + 1));
    std::string tok;
    while (phones >> tok) {
      unsigned value = 0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || value >= kNumPhones)
        throw FormatError("vocabulary: bad phone id '" + tok + "'", lineno);
      pron.push_back(static_cast<PhoneId>(value));
    }
    try {
      vocab.add(line.substr(0, tab), std::move(pron));
    } catch (const DataError& e) {
      throw FormatError(std::string("vocabulary: ") + e.what(), lineno);
    }
  }
  return vocab;
}

inline Vocabulary read_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary '" + path + "'");
  return read_vocabulary(in);
}

inline void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (WordId id = 0; id < vocab.size(); ++id) {
    out << vocab.word(id) << '\t';
    const auto& pron = vocab.pronunciation(id);
    for (std::size_t i = 0; i < pron.size(); ++i)
      out << (i ? " " : "") << static_cast<unsigned>(pron[i]);
    out << '\n';
  }
}

/// The fixed word sequence whose utterance-initial presence is detected.
struct TriggerPhrase {
  std::vector<WordId> words;

  TriggerPhrase() = default;
  explicit TriggerPhrase(std::vector<WordId> ids) : words(std::move(ids)) {
    if (words.empty()) throw ConfigError("trigger phrase is empty");
    for (WordId w : words)
      if (w == kEpsilon) throw ConfigError("trigger phrase contains epsilon");
  }

  std::size_t size() const { return words.size(); }

  // Whitespace-separated words looked up in `vocab`.
  static TriggerPhrase parse(const Vocabulary& vocab, std::string_view text) {
    std::istringstream in{std::string(text)};
    std::vector<WordId> ids;
    std::string w;
    while (in >> w) ids.push_back(vocab.id(w));
    return TriggerPhrase(std::move(ids));
  }
};

/// Throws DataError if any arc word is outside `vocab`.
inline void check_words(const Lattice& lat, const Vocabulary& vocab) {
  for (std::size_t i = 0; i < lat.arcs.size(); ++i)
    if (!vocab.contains(lat.arcs[i].word))
      throw DataError("lattice '" + lat.utterance_id + "' arc " +
                      std::to_string(i) + ": unknown word id " +
                      std::to_string(lat.arcs[i].word));
}

}  // namespace vtl
