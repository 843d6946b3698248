// Copyright 2026 The dpmp Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at

//     https://www.apache.org/licenses/LICENSE-2.0

// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "dpmp/io.hpp"
#include "dpmp/problems.hpp"

namespace dpmp {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("dpmp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, const std::string& out = "out") const {
    const std::string cmd = std::string(DPMP_CLI_PATH) + " " + args + " --out " + (dir_ / out).string() + " > " +
                            (dir_ / "log.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  fs::path path(const std::string& rel) const { return dir_ / rel; }
  Json read_json(const std::string& rel) const {
    std::ifstream is(dir_ / rel);
    return Json::parse(is);
  }

  fs::path dir_;
};

TEST_F(Cli, SolveWritesExtremalAndReport) {
  ASSERT_EQ(run("solve --problem counterexample --tau 0 0 0"), 0);
  EXPECT_TRUE(fs::exists(path("out/extremal.csv")));
  const Json j = read_json("out/report.json");
  EXPECT_NEAR(j["t_f"].get<double>(), 1.0, 1e-8);
  EXPECT_EQ(j["problem"], "counterexample");
}

TEST_F(Cli, MissingProblemIsConfigError) { EXPECT_EQ(run("solve --tau 0 0 0"), 1); }

TEST_F(Cli, UnknownFlagIsConfigError) { EXPECT_EQ(run("solve --problem delayed-lq --bogus 1"), 1); }

TEST_F(Cli, NoSubcommandIsConfigError) { EXPECT_EQ(run("--problem delayed-lq"), 1); }

TEST_F(Cli, FreeTimeWithControlDelayRejected) {
  EXPECT_EQ(run("solve --problem delayed-lq --free-time --tau 0 0 0.1"), 1);
  EXPECT_EQ(run("solve --problem double-integrator --tau 0 0 0.1"), 1);
}

TEST_F(Cli, DelayOutsideRangeRejected) {
  EXPECT_EQ(run("solve --problem delayed-lq --tau 0 1.5 0"), 1);
  EXPECT_EQ(run("solve --problem delayed-lq --tau -0.1 0 0"), 1);
}

TEST_F(Cli, NewtonLimitIsSolverFailure) {
  EXPECT_EQ(run("solve --problem counterexample --tau 0 0 0 --max-newton 0"), 2);
}

TEST_F(Cli, HomotopyWritesPathDirectory) {
  ASSERT_EQ(run("homotopy --problem delayed-lq --tau 0 0.1 0"), 0);
  const Json j = read_json("out/path.json");
  EXPECT_GE(j["steps"].size(), 2u);
  EXPECT_TRUE(fs::exists(path("out/continuity.csv")));
  EXPECT_TRUE(fs::exists(path("out/step_000.csv")));
}

TEST_F(Cli, StuckHomotopyKeepsPartialPath) {
  EXPECT_EQ(run("homotopy --problem counterexample --tau 0.1 0 0 --initial-step 1 --min-step 1 --max-newton 1"), 3);
  const Json j = read_json("out/path.json");
  EXPECT_TRUE(j["steps"][0]["accepted"].get<bool>());
  EXPECT_FALSE(j["steps"].back()["accepted"].get<bool>());
}

TEST_F(Cli, NeedleCheckPassesOnDelayedLq) {
  ASSERT_EQ(run("needle-check --problem delayed-lq --tau 0 0.2 0"), 0);
  const Json j = read_json("out/needle.json");
  EXPECT_GE(j["needle"]["slope"].get<double>(), 1.5);
  EXPECT_TRUE(fs::exists(path("out/needle.csv")));
}

TEST_F(Cli, NeedleValueDimensionChecked) {
  EXPECT_EQ(run("needle-check --problem delayed-lq --tau 0 0.2 0 --needle-value 1 2"), 1);
}

TEST_F(Cli, ConeCheckOnSolvedAndCorruptedExtremals) {
  ASSERT_EQ(run("solve --problem double-integrator --tau 0 0 0", "s"), 0);
  EXPECT_EQ(run("cone-check --problem double-integrator --tau 0 0 0 --extremal " + path("s/extremal.csv").string()), 0);
  EXPECT_GE(read_json("out/cone.json")["size"].get<std::size_t>(), 100u);

  const OcpProblem prob = build_double_integrator(1.0);
  std::ifstream is(path("s/extremal.csv"));
  Extremal e = read_extremal_csv(is, prob, DelayVector());
  e.p = SampledFunction(e.p.grid(), Mat(-e.p.values()), Interp::linear);
  write_extremal_csv(path("flipped.csv"), prob, e);
  EXPECT_EQ(run("cone-check --problem double-integrator --tau 0 0 0 --extremal " + path("flipped.csv").string(), "f"), 4);
  EXPECT_FALSE(read_json("f/cone.json")["pass"].get<bool>());
}

TEST_F(Cli, MalformedExtremalIsConfigError) {
  std::ofstream(path("bad.csv")) << "t,x_1\n0,oops\n";
  EXPECT_EQ(run("cone-check --problem double-integrator --tau 0 0 0 --extremal " + path("bad.csv").string()), 1);
  EXPECT_EQ(run("cone-check --problem double-integrator --tau 0 0 0 --extremal " + path("missing.csv").string()), 1);
}

TEST_F(Cli, WeakStrongNeedsTwoLadderValues) {
  EXPECT_EQ(run("weak-strong --ladder 0.1"), 1);
  EXPECT_EQ(run("weak-strong --problem delayed-lq --ladder 0.1 0.05"), 1);
}

TEST_F(Cli, ConfigFileSuppliesSharedKeys) {
  std::ofstream(path("run.ini")) << "problem = delayed-lq\ntau = 0 0.2 0\n";
  ASSERT_EQ(run("--config " + path("run.ini").string() + " solve"), 0);
  const Json j = read_json("out/report.json");
  EXPECT_EQ(j["problem"], "delayed-lq");
  EXPECT_DOUBLE_EQ(j["tau"][1].get<double>(), 0.2);
}

TEST_F(Cli, CommandLineOverridesConfigFile) {
  std::ofstream(path("run.ini")) << "problem = delayed-lq\ntau = 0 0.2 0\n";
  ASSERT_EQ(run("--config " + path("run.ini").string() + " --tau 0 0.1 0 solve"), 0);
  EXPECT_DOUBLE_EQ(read_json("out/report.json")["tau"][1].get<double>(), 0.1);
}

}  // namespace
}  // namespace dpmp
