// Copyright 2026 The Committee Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the committee binary end to end through a shell.

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/numbers.h"
#include "absl/strings/str_split.h"
#include "gtest/gtest.h"
#include "json.hpp"
#include "test_util.h"

namespace committee {
namespace {

using nlohmann::json;
using testing::TempDir;

struct CliResult {
  int code = -1;
  std::string out;
};

// Runs the binary with `args`; stdout is captured, stderr discarded.
CliResult Cli(const std::string& args) {
  const std::string cmd = std::string(COMMITTEE_CLI_PATH) + " " + args + " 2>/dev/null";
  CliResult run;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return run;
  char buf[4096];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) run.out.append(buf, n);
  const int status = ::pclose(pipe);
  run.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return run;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> ReadCsv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  for (absl::string_view line : absl::StrSplit(text, '\n', absl::SkipEmpty())) {
    rows.emplace_back(absl::StrSplit(line, ','));
  }
  return rows;
}

double Num(const std::string& s) {
  double v = 0;
  EXPECT_TRUE(absl::SimpleAtod(s, &v)) << s;
  return v;
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::filesystem::path(TempDir("cli"));
    ASSERT_TRUE(SavePool(testing::ThreeExampleFixture(), *dir_ / "fixture").ok());
    auto pool = GenerateSyntheticPool(testing::Synth({0.7, 0.8, 0.85}, {1, 3, 8}, 1500, 5));
    ASSERT_TRUE(pool.ok());
    ASSERT_TRUE(SavePool(*pool, *dir_ / "synth").ok());
  }
  static void TearDownTestSuite() {
    std::filesystem::remove_all(*dir_);
    delete dir_;
  }
  static std::string Fixture() { return (*dir_ / "fixture" / "pool.json").string(); }
  static std::string Synth() { return (*dir_ / "synth" / "pool.json").string(); }
  static std::string Path(const std::string& name) { return (*dir_ / name).string(); }

  static std::filesystem::path* dir_;
};

std::filesystem::path* CliTest::dir_ = nullptr;

TEST_F(CliTest, EvaluateFixture) {
  CliResult run = Cli("evaluate --manifest " + Fixture() + " --models a,b --thresholds 0.6");
  ASSERT_EQ(run.code, 0);
  const json doc = json::parse(run.out);
  EXPECT_NEAR(doc["evaluation"]["avg_cost"].get<double>(), 7.0 / 3.0, 1e-12);
  EXPECT_EQ(doc["evaluation"]["accuracy"].get<double>(), 1.0);
  EXPECT_EQ(doc["config"]["flags"]["--thresholds"], "0.6");
}

TEST_F(CliTest, ThresholdOneReportsTheEnsemble) {
  CliResult cascade = Cli("evaluate --manifest " + Synth() + " --models m0,m1,m2 --thresholds 1,1");
  CliResult ensemble = Cli("evaluate --manifest " + Synth() + " --models m0,m1,m2");
  ASSERT_EQ(cascade.code, 0);
  ASSERT_EQ(ensemble.code, 0);
  const json a = json::parse(cascade.out)["evaluation"];
  const json b = json::parse(ensemble.out)["evaluation"];
  EXPECT_EQ(a["accuracy"], b["accuracy"]);
  EXPECT_EQ(a["avg_cost"], b["avg_cost"]);
  EXPECT_EQ(a["exit_counts"], b["exit_counts"]);
}

TEST_F(CliTest, InfeasibleTargetsExitTwo) {
  EXPECT_EQ(Cli("search-thresholds --manifest " + Synth() +
                " --models m0,m1 --target-flops 0.5").code, 2);
  EXPECT_EQ(Cli("search-thresholds --manifest " + Synth() +
                " --models m0,m1 --target-accuracy 0.999").code, 2);
  EXPECT_EQ(Cli("select --manifest " + Synth() + " --target-accuracy 0.7 --worst-case 0.5")
                .code, 2);
}

TEST_F(CliTest, BadInputExitsOne) {
  EXPECT_EQ(Cli("evaluate --manifest " + Path("missing.json") + " --models a").code, 1);
  EXPECT_EQ(Cli("evaluate --manifest " + Fixture() + " --models a,zz").code, 1);
  EXPECT_EQ(Cli("evaluate --manifest " + Fixture() + " --models a,b --metric bogus").code, 1);
  EXPECT_EQ(Cli("evaluate --manifest " + Fixture() + " --models a,b --thresholds x").code, 1);
  EXPECT_EQ(Cli("search-thresholds --manifest " + Fixture() +
                " --models a,b --target-flops 2 --target-accuracy 0.5").code, 1);
  EXPECT_EQ(Cli("no-such-command").code, 1);
  EXPECT_EQ(Cli("--help").code, 0);
}

TEST_F(CliTest, SweepEndpoints) {
  CliResult run = Cli("sweep --manifest " + Synth() + " --models m0,m1 --grid 10");
  ASSERT_EQ(run.code, 0);
  const auto rows = ReadCsv(run.out);
  ASSERT_GE(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"t", "accuracy", "avg_cost"}));
  // t = 0 runs only the first model; t = 1 runs both on every example.
  EXPECT_EQ(Num(rows[1][0]), 0.0);
  EXPECT_EQ(Num(rows[1][2]), 1.0);
  EXPECT_EQ(Num(rows.back()[0]), 1.0);
  EXPECT_EQ(Num(rows.back()[2]), 4.0);
}

TEST_F(CliTest, FrontierIsStrictlyImproving) {
  CliResult run = Cli("pareto --manifest " + Synth() + " --max-models 3 --grid 10");
  ASSERT_EQ(run.code, 0);
  const auto rows = ReadCsv(run.out);
  ASSERT_GE(rows.size(), 3u);
  for (size_t i = 2; i < rows.size(); ++i) {
    EXPECT_GT(Num(rows[i][0]), Num(rows[i - 1][0]));
    EXPECT_GT(Num(rows[i][1]), Num(rows[i - 1][1]));
  }
}

TEST_F(CliTest, ExitTableSumsToHundred) {
  const std::string table = Path("exit.csv");
  CliResult run = Cli("search-thresholds --manifest " + Synth() +
                " --models m0,m1,m2 --target-flops 3 --exit-table " + table);
  ASSERT_EQ(run.code, 0);
  const auto rows = ReadCsv(ReadFile(table));
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_EQ(rows[0].size(), 6u);
  double sum = 0;
  for (size_t c = 3; c < rows[1].size(); ++c) sum += Num(rows[1][c]);
  EXPECT_NEAR(sum, 100.0, 0.1);
}

TEST_F(CliTest, OutputDoesNotDependOnJobs) {
  for (const std::string cmd :
       {"select --target-accuracy 0.82 --max-models 3", "pareto --max-models 3 --grid 10"}) {
    CliResult one = Cli(cmd + " --manifest " + Synth() + " --jobs 1");
    CliResult four = Cli(cmd + " --manifest " + Synth() + " --jobs 4");
    ASSERT_EQ(one.code, 0);
    if (one.out.front() == '{') {
      json a = json::parse(one.out), b = json::parse(four.out);
      a["config"]["flags"].erase("--jobs");
      b["config"]["flags"].erase("--jobs");
      EXPECT_EQ(a, b);
    } else {
      EXPECT_EQ(one.out, four.out);
    }
  }
}

TEST_F(CliTest, ValidateWellFormedPool) {
  CliResult run = Cli("validate --manifest " + Synth());
  ASSERT_EQ(run.code, 0);
  const json doc = json::parse(run.out);
  EXPECT_TRUE(doc["warnings"].empty());
  EXPECT_EQ(doc["entries"].size(), 3u);
  EXPECT_EQ(doc["num_examples"], 1500);
}

TEST_F(CliTest, SplitThenSearchOnSelection) {
  ASSERT_EQ(Cli("split --manifest " + Synth() + " --seed 2 --out " + Path("halves")).code, 0);
  CliResult sel = Cli("validate --manifest " + Path("halves/selection/pool.json"));
  CliResult eval = Cli("validate --manifest " + Path("halves/evaluation/pool.json"));
  ASSERT_EQ(sel.code, 0);
  ASSERT_EQ(eval.code, 0);
  EXPECT_EQ(json::parse(sel.out)["num_examples"].get<int>() +
                json::parse(eval.out)["num_examples"].get<int>(),
            1500);

  CliResult run = Cli("search-thresholds --manifest " + Synth() +
                " --models m0,m1 --target-flops 2 --selection-fraction 0.5 --seed 2");
  ASSERT_EQ(run.code, 0);
  const json doc = json::parse(run.out);
  EXPECT_LE(doc["selection"]["avg_cost"].get<double>(), 2.0);
  EXPECT_EQ(doc["selection"]["thresholds"], doc["evaluation"]["thresholds"]);
}

TEST_F(CliTest, DenseRoundTrip) {
  const DensePool pool = testing::CorruptedQuadrantPool(1);
  ASSERT_TRUE(SaveDensePool(pool, *dir_ / "dense").ok());
  const std::string manifest = Path("dense/pool.json");
  EXPECT_EQ(Cli("validate --dense --manifest " + manifest).code, 0);
  CliResult run = Cli("dense-evaluate --manifest " + manifest + " --models coarse,fine --cell-size 8");
  ASSERT_EQ(run.code, 0);
  EXPECT_EQ(json::parse(run.out)["evaluation"]["avg_cost"].get<double>(), 4.0);
  EXPECT_EQ(Cli("dense-evaluate --manifest " + manifest +
                " --models coarse,fine --cell-size zero").code, 1);
}

}  // namespace
}  // namespace committee
