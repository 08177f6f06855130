// Copyright 2026 The qtomo Authors
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

// Runs the qtomo binary end to end in a scratch directory.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "qtomo/io.hpp"

namespace fs = std::filesystem;
using qtomo::io::Json;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qtomo_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // `env` is prepended verbatim, e.g. "QTOMO_LOG=trace".
  Outcome run(const std::string& args, const std::string& env = "QTOMO_LOG=quiet") const {
    const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + QTOMO_CLI_PATH + "' " + args +
                            " >stdout.txt 2>stderr.txt";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(dir_ / "stdout.txt"), slurp(dir_ / "stderr.txt")};
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(dir_ / name) << text; }
  Json read(const std::string& name) const { return qtomo::io::read_json_file(dir_ / name); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, AnalyzePom) {
  Outcome r = run("analyze-pom builtin:six --out gram.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("perfect informationally complete, n>0 = 4"), std::string::npos) << r.out;
  EXPECT_EQ(read("gram.json").at("n_positive"), 4);

  ASSERT_EQ(run("make-pom --kind trine --out trine.json").code, 0);
  r = run("analyze-pom trine.json");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("perfect informationally incomplete, n>0 = 3"), std::string::npos) << r.out;

  write("empty.json", R"({"dim": 2, "outcomes": []})");
  EXPECT_EQ(run("analyze-pom empty.json").code, 2);
  EXPECT_EQ(run("analyze-pom builtin:nothing").code, 2);
  EXPECT_EQ(run("analyze-pom missing.json").code, 2);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("estimate-state --counts nowhere.json").code, 2);
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("analyze-pom builtin:six", "QTOMO_LOG=loud").code, 2);
}

TEST_F(Cli, SimulateIsSeedDeterministic) {
  write("state.json", R"({"bloch": [0.2, 0.0, 0.5]})");
  fs::create_directories(dir_ / "poms");
  ASSERT_EQ(run("make-pom --kind six --out poms/six.json").code, 0);
  fs::create_directories(dir_ / "data");
  ASSERT_EQ(run("simulate --state state.json --pom poms/six.json -N 1000 --seed 5 --out data/a.json").code, 0);
  ASSERT_EQ(run("simulate --state state.json --pom poms/six.json -N 1000 --seed 5 --out data/b.json").code, 0);
  ASSERT_EQ(run("simulate --state state.json --pom poms/six.json -N 1000 --seed 6 --out data/c.json").code, 0);
  EXPECT_EQ(slurp(dir_ / "data/a.json"), slurp(dir_ / "data/b.json"));
  EXPECT_NE(slurp(dir_ / "data/a.json"), slurp(dir_ / "data/c.json"));
  const Json a = read("data/a.json");
  EXPECT_EQ(a.at("pom_ref"), "../poms/six.json");
  EXPECT_EQ(a.at("total"), 1000);
  // the relative pom_ref still resolves when estimating from another directory
  EXPECT_EQ(run("estimate-state --counts data/a.json --method ml").code, 0);
}

TEST_F(Cli, TrineEstimate) {
  write("counts.json", R"({"pom_ref": "builtin:trine", "counts": [6, 2, 0]})");
  const Outcome r = run("estimate-state --counts counts.json --method ml --out report.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("converged = true"), std::string::npos);
  const Json j = read("report.json");
  EXPECT_NEAR(j.at("bloch")[0].get<double>(), 0.5641, 1e-3);
  EXPECT_NEAR(j.at("bloch")[1].get<double>(), 0.0, 1e-3);
  EXPECT_NEAR(j.at("bloch")[2].get<double>(), 0.8257, 1e-3);
  EXPECT_EQ(j.at("config").at("lambda"), 0.0);
  // outside the ball: no closed form
  EXPECT_EQ(run("estimate-state --counts counts.json --method closed-form").code, 3);
}

TEST_F(Cli, VonNeumannMethodsAgree) {
  write("counts.json", R"({"pom_ref": "builtin:computational-2", "counts": [70, 30]})");
  ASSERT_EQ(run("estimate-state --counts counts.json --method mlme --out mlme.json").code, 0);
  ASSERT_EQ(run("estimate-state --counts counts.json --method closed-form --out cf.json").code, 0);
  EXPECT_NEAR(read("mlme.json").at("bloch")[2].get<double>(), 0.4, 1e-6);
  EXPECT_NEAR(read("cf.json").at("bloch")[2].get<double>(), 0.4, 1e-15);
}

TEST_F(Cli, InvalidInputs) {
  write("short.json", R"({"pom_ref": "builtin:trine", "counts": [6, 2]})");
  EXPECT_EQ(run("estimate-state --counts short.json").code, 3);
  write("zero.json", R"({"pom_ref": "builtin:trine", "counts": [0, 0, 0]})");
  EXPECT_EQ(run("estimate-state --counts zero.json").code, 3);
  write("noref.json", R"({"counts": [1, 2, 3]})");
  EXPECT_EQ(run("estimate-state --counts noref.json").code, 2);
  EXPECT_EQ(run("estimate-state --counts noref.json --pom builtin:trine").code, 0);
  write("garbage.json", "{\"counts\": [1, 2,");
  EXPECT_EQ(run("estimate-state --counts garbage.json").code, 2);
  write("counts.json", R"({"pom_ref": "builtin:trine", "counts": [1, 2, 3]})");
  EXPECT_EQ(run("estimate-state --counts counts.json --method mlme --lambda -1").code, 3);
}

TEST_F(Cli, NonConvergenceExitCode) {
  write("counts.json", R"({"pom_ref": "builtin:trine", "counts": [6, 2, 0]})");
  EXPECT_EQ(run("estimate-state --counts counts.json --max-iters 10").code, 4);
  EXPECT_EQ(run("estimate-state --counts counts.json --max-iters 10 --allow-nonconverged --out r.json").code, 0);
  EXPECT_EQ(read("r.json").at("converged"), false);
}

TEST_F(Cli, ConfigPrecedence) {
  write("counts.json", R"({"pom_ref": "builtin:trine", "counts": [40, 35, 25]})");
  write("config.json", R"({"lambda": 1e-6, "max_iters": 50})");
  ASSERT_EQ(run("estimate-state --counts counts.json --method mlme --config config.json --max-iters 30000 "
                "--out r.json").code,
            0);
  const Json c = read("r.json").at("config");
  EXPECT_EQ(c.at("lambda"), 1e-6);
  EXPECT_EQ(c.at("max_iters"), 30000);
  write("typo.json", R"({"lamda": 1e-6})");
  EXPECT_EQ(run("estimate-state --counts counts.json --config typo.json").code, 2);
}

TEST_F(Cli, LogLevels) {
  write("counts.json", R"({"pom_ref": "builtin:trine", "counts": [6, 2, 0]})");
  Outcome r = run("estimate-state --counts counts.json", "QTOMO_LOG=trace");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.err.rfind("iter 1 ", 0), 0u) << r.err.substr(0, 200);
  r = run("estimate-state --counts counts.json", "QTOMO_LOG=quiet");
  EXPECT_TRUE(r.err.empty());
  EXPECT_FALSE(r.out.empty());
}

TEST_F(Cli, ProcessRoundTrip) {
  write("identity.json", R"({"kraus": [[[1, 0], [0, 1]]]})");
  ASSERT_EQ(run("simulate --channel identity.json --pom builtin:six -N 100000 --seed 11 --out data.json").code, 0);
  const Outcome r = run("estimate-process --dataset data.json --method ml --reference identity.json --out report.json");
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = read("report.json");
  EXPECT_LE(j.at("hs_error").get<double>(), 5e-3);
  EXPECT_LE(j.at("max_tp_deviation").get<double>(), 1e-9);
  EXPECT_EQ(j.at("kind"), "process");

  Json d = read("data.json");
  d.erase("pom_ref");
  std::ofstream(dir_ / "noref.json") << d.dump();
  EXPECT_EQ(run("estimate-process --dataset noref.json").code, 2);
  write("qutrit.json", R"({"kraus": [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]]})");
  EXPECT_EQ(run("estimate-process --dataset data.json --reference qutrit.json").code, 3);
}
