/*
 * Copyright The SMN Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "smn/cli.hpp"

namespace fs = std::filesystem;

namespace smn {
namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("smn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int cli(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return cli::run_cli(args, out_, err_);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  void make_inputs(const std::string& mode, int levels, int width, int frames) {
    std::vector<std::string> gen = {"gen", "--out", path("in.smns"), "--mode", mode, "--width",
                                    std::to_string(width), "--frames", std::to_string(frames),
                                    "--objects", "3:1:1:1,5:-0.5:0.6:2", "--seed", "7"};
    std::vector<std::string> init = {"init-weights", "--out", path("w.smnw"), "--mode", mode,
                                     "--levels", std::to_string(levels), "--width",
                                     std::to_string(width), "--classes", "3", "--seed", "5",
                                     "--channels", "3,4,4,4,4", "--decoder-channels",
                                     "2,2,3,3,3"};
    if (mode == "video") {
      for (auto* v : {&gen, &init}) {
        v->push_back("--height");
        v->push_back(std::to_string(width));
      }
    }
    // Trim the channel lists to the level count.
    auto trim = [levels](std::string list) {
      std::string out;
      std::stringstream ss(list);
      std::string item;
      for (int i = 0; i < levels && std::getline(ss, item, ','); ++i)
        out += (i ? "," : "") + item;
      return out;
    };
    init[14] = trim(init[14]);
    init[16] = trim(init[16]);
    ASSERT_EQ(cli(gen), 0) << err_.str();
    ASSERT_EQ(cli(init), 0) << err_.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, FormulasReportExactAndApproximateCounts) {
  ASSERT_EQ(cli({"formulas", "--mode", "line", "--levels", "5", "--width", "32"}), 0);
  const std::string s = out_.str();
  for (const char* needle : {"63", "1365", "1364", "160"})
    EXPECT_NE(s.find(needle), std::string::npos) << needle << "\n" << s;
}

TEST_F(CliTest, VerifyPassesOnCleanStream) {
  make_inputs("line", 3, 16, 200);
  EXPECT_EQ(cli({"verify", "--weights", path("w.smnw"), "--input", path("in.smns"), "--frames",
                 "200"}),
            0)
      << err_.str();
  EXPECT_NE(out_.str().find("EQUIVALENT"), std::string::npos);
}

TEST_F(CliTest, VerifyCatchesInjectedFault) {
  make_inputs("line", 3, 16, 200);
  EXPECT_EQ(cli({"verify", "--weights", path("w.smnw"), "--input", path("in.smns"), "--frames",
                 "200", "--inject-fault", "50,2"}),
            3);
  EXPECT_NE(err_.str().find("frame 52"), std::string::npos) << err_.str();
}

TEST_F(CliTest, EnginesWriteIdenticalLabels) {
  make_inputs("video", 2, 8, 40);
  for (const char* e : {"shift", "smn"})
    ASSERT_EQ(cli({"run", "--engine", e, "--weights", path("w.smnw"), "--input", path("in.smns"),
                   "--out", path(std::string(e) + ".smnl")}),
              0)
        << err_.str();
  const std::string a = slurp(path("shift.smnl"));
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(path("smn.smnl")));
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  make_inputs("line", 3, 16, 60);
  for (const char* name : {"a.smnl", "b.smnl"})
    ASSERT_EQ(cli({"run", "--engine", "smn", "--weights", path("w.smnw"), "--input",
                   path("in.smns"), "--out", path(name)}),
              0);
  EXPECT_EQ(slurp(path("a.smnl")), slurp(path("b.smnl")));
}

TEST_F(CliTest, MeterCsvHasOneRowPerFrameAndLevel) {
  make_inputs("line", 3, 16, 30);
  ASSERT_EQ(cli({"run", "--engine", "smn", "--weights", path("w.smnw"), "--input",
                 path("in.smns"), "--out", path("o.smnl"), "--meter", path("m.csv")}),
            0);
  std::ifstream is(path("m.csv"));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "frame,level,cells,mults");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 30 * 4);
}

TEST_F(CliTest, BenchPrintsAllEngines) {
  make_inputs("line", 2, 8, 20);
  ASSERT_EQ(cli({"bench", "--weights", path("w.smnw"), "--input", path("in.smns"), "--frames",
                 "20", "--repeat", "3"}),
            0)
      << err_.str();
  for (const char* e : {"patch", "shift", "smn"})
    EXPECT_NE(out_.str().find(e), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(cli({}), 1);
  EXPECT_EQ(cli({"frobnicate"}), 1);
  EXPECT_EQ(cli({"formulas", "--mode", "line", "--levels", "5"}), 1);
  EXPECT_EQ(cli({"formulas", "--mode", "line", "--levels", "5", "--width", "33"}), 1);
  EXPECT_EQ(cli({"formulas", "--mode", "diagonal", "--levels", "2", "--width", "8"}), 1);
  EXPECT_EQ(cli({"gen", "--out", path("x"), "--mode", "line", "--width", "8", "--frames", "3",
                 "--objects", "1:2", "--seed", "0"}),
            1);
}

TEST_F(CliTest, FileErrorsExitTwo) {
  EXPECT_EQ(cli({"verify", "--weights", path("missing.smnw"), "--input", path("x"), "--frames",
                 "10"}),
            2);
  {
    std::ofstream os(path("junk.smnw"), std::ios::binary);
    os << "not a weights file";
  }
  make_inputs("line", 2, 8, 20);
  EXPECT_EQ(cli({"run", "--engine", "smn", "--weights", path("junk.smnw"), "--input",
                 path("in.smns"), "--out", path("o.smnl")}),
            2);
  // Stream geometry that disagrees with the weights.
  ASSERT_EQ(cli({"gen", "--out", path("wide.smns"), "--mode", "line", "--width", "16",
                 "--frames", "20", "--objects", "none", "--seed", "1"}),
            0);
  EXPECT_EQ(cli({"run", "--engine", "smn", "--weights", path("w.smnw"), "--input",
                 path("wide.smns"), "--out", path("o.smnl")}),
            2);
}

}  // namespace
}  // namespace smn
