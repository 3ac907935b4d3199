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

// Run manifests and atomic artifact writes for the command-line tool.

#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "vtl/error.hpp"

namespace vtl::cli {

/// Lowercase hex SHA-256 of a file's bytes.
inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest initialization failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial file.
inline void write_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path() && !std::filesystem::exists(target.parent_path()))
    throw DataError("output directory '" + target.parent_path().string() + "' does not exist");
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("failed writing '" + path + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw DataError("cannot move output into place at '" + path + "'");
  }
}

/// Everything needed to re-run a subcommand: its resolved options, digests
/// of the files it read and the files it produced. No timestamps, so reruns
/// write identical manifests.
class RunManifest {
 public:
  explicit RunManifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  nlohmann::ordered_json& config() { return config_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void add_input(const std::string& role, const std::string& path) {
    inputs_.push_back({role, path, sha256_file(path)});
  }
  void add_output(const std::string& role, const std::string& path) {
    outputs_.push_back({role, path, sha256_file(path)});
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand_;
    j["version"] = VTL_VERSION;
    if (seed_) j["seed"] = *seed_;
    j["config"] = config_.is_null() ? nlohmann::ordered_json::object() : config_;
    auto files = [](const std::vector<File>& v) {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (const auto& f : v) arr.push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}});
      return arr;
    };
    j["inputs"] = files(inputs_);
    j["outputs"] = files(outputs_);
    return j;
  }

  void write(const std::string& path) const { write_atomic(path, to_json().dump(2) + "\n"); }

 private:
  struct File {
    std::string role, path, sha256;
  };
  std::string subcommand_;
  nlohmann::ordered_json config_;
  std::optional<std::uint64_t> seed_;
  std::vector<File> inputs_, outputs_;
};

}  // namespace vtl::cli
