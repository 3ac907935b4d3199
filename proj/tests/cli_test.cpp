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

// Runs the `vtl` binary as a subprocess.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "vtl/scores.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int status;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vtl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Result run(const std::string& args) {
    const std::string cmd = std::string(VTL_TOOL) + " " + args + " >" + (dir_ / "stdout").string() +
                            " 2>" + (dir_ / "stderr").string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(dir_ / "stdout"), slurp(dir_ / "stderr")};
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void small_corpus() {
    std::ofstream(path("gen.json")) << R"({"seed": 3, "n_positive": 60, "n_negative": 30})";
    ASSERT_EQ(run("gen --config " + path("gen.json") + " --out-dir " + path("d")).status, 0);
  }

  fs::path dir_;
};

TEST_F(Cli, PipelineSmoke) {
  small_corpus();
  for (const char* f : {"train.jsonl", "dev.jsonl", "eval.jsonl", "vocab.tsv", "gen-manifest.json"})
    EXPECT_TRUE(fs::exists(dir_ / "d" / f)) << f;

  auto r = run("posterior --corpus " + path("d/dev.jsonl") + " --trigger \"hey siri\" --out " + path("s.csv"));
  ASSERT_EQ(r.status, 0) << r.err;
  std::ifstream in(path("s.csv"));
  const auto scores = vtl::read_scores(in);
  EXPECT_FALSE(scores.empty());
  EXPECT_TRUE(fs::exists(path("s.csv.manifest.json")));

  r = run("baseline --corpus " + path("d/dev.jsonl") + " --out " + path("b.csv"));
  ASSERT_EQ(r.status, 0) << r.err;
  r = run("train-ae --lexicon " + path("d/vocab.tsv") + " --epochs 100 --out " + path("ae.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  r = run("stats --corpus " + path("d/train.jsonl") + " --ae " + path("ae.json") + " --out " + path("st.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  r = run("train --corpus " + path("d/train.jsonl") + " --ae " + path("ae.json") + " --stats " +
          path("st.json") + " --arch uni --state-dim 4 --hidden 3 --epochs 2 --out " + path("m.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  r = run("score --model " + path("m.json") + " --corpus " + path("d/dev.jsonl") + " --jobs 2 --out " +
          path("r.csv"));
  ASSERT_EQ(r.status, 0) << r.err;

  r = run("eval --scores " + path("r.csv") + " --baseline-scores " + path("b.csv") + " --roc " +
          path("roc.csv") + " --svg " + path("roc.svg") + " --summary " + path("dev.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto dev = nlohmann::json::parse(slurp(path("dev.json")));
  EXPECT_EQ(dev["selection"], "closest_pm");
  for (const char* k : {"method", "p_miss", "p_fa", "eer", "threshold"}) EXPECT_TRUE(dev.contains(k)) << k;
  EXPECT_NE(r.out.find('%'), std::string::npos);

  // Transfer the dev threshold to dev itself: rates must reproduce exactly.
  r = run("eval --scores " + path("r.csv") + " --threshold-from " + path("dev.json") + " --summary " +
          path("again.json"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto again = nlohmann::json::parse(slurp(path("again.json")));
  EXPECT_EQ(again["selection"], "transferred");
  EXPECT_EQ(again["p_miss"], dev["p_miss"]);
  EXPECT_EQ(again["p_fa"], dev["p_fa"]);

  const auto manifest = nlohmann::json::parse(slurp(path("m.json.manifest.json")));
  EXPECT_EQ(manifest["subcommand"], "train");
  EXPECT_EQ(manifest["seed"], 1);
  EXPECT_EQ(manifest["inputs"].size(), 4u);
  EXPECT_EQ(manifest["outputs"][0]["sha256"].get<std::string>().size(), 64u);
}

TEST_F(Cli, GenIsReproducible) {
  small_corpus();
  const std::string first = slurp(dir_ / "d" / "train.jsonl") + slurp(dir_ / "d" / "gen-manifest.json");
  fs::remove_all(dir_ / "d");
  ASSERT_EQ(run("gen --config " + path("gen.json") + " --out-dir " + path("d")).status, 0);
  EXPECT_EQ(first, slurp(dir_ / "d" / "train.jsonl") + slurp(dir_ / "d" / "gen-manifest.json"));
}

TEST_F(Cli, MissingRequiredFlagIsAUsageError) {
  const auto r = run("posterior --out " + path("x.csv"));
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("--corpus"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
}

TEST_F(Cli, UnknownSubcommandIsAUsageError) {
  EXPECT_EQ(run("frobnicate").status, 2);
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("train --arch lstm --corpus a --ae b --out c").status, 2);
}

TEST_F(Cli, HelpOnEverySubcommand) {
  EXPECT_EQ(run("--help").status, 0);
  for (const char* sub : {"gen", "train-ae", "stats", "train", "score", "posterior", "eval", "baseline"}) {
    const auto r = run(std::string(sub) + " --help");
    EXPECT_EQ(r.status, 0) << sub;
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << sub;
  }
}

TEST_F(Cli, CorruptLineIsNamed) {
  small_corpus();
  std::ifstream in(path("d/train.jsonl"));
  std::ofstream out(path("bad.jsonl"));
  std::string line;
  for (int n = 1; std::getline(in, line) && n <= 20; ++n) out << (n == 17 ? "{\"utt\": \"x\", " : line) << '\n';
  out.close();
  const auto r = run("posterior --corpus " + path("bad.jsonl") + " --vocab " + path("d/vocab.tsv") +
                     " --out " + path("s.csv"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("line 17"), std::string::npos) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
}

TEST_F(Cli, InvalidLatticeIsADataError) {
  small_corpus();
  std::ofstream(path("cyc.jsonl"))
      << R"({"utt":"loop","num_nodes":2,"label":true,"arcs":[[0,1,1,0,1,-1,-1],[1,0,1,1,2,-1,-1]]})"
      << '\n';
  const auto r = run("baseline --corpus " + path("cyc.jsonl") + " --vocab " + path("d/vocab.tsv") +
                     " --out " + path("s.csv"));
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find("loop"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("s.csv")));
}

}  // namespace
