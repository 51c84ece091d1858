// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace hotswitch {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hotswitch_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, PlanBertEmitsOneStrategyPerLayer) {
  const auto r = run({"plan", "--model", "bert", "--b", "1", "--s", "4096"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.at("layers").size(), 24u);
  for (const auto& s : j.at("layers")) EXPECT_TRUE(s.is_string());
}

TEST_F(CliTest, VerifyPasses) {
  const auto r = run({"verify", "--p", "1", "2", "--configs", "3"});
  ASSERT_EQ(r.code, 0) << r.err << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_TRUE(j.at("pass").get<bool>());
  EXPECT_FALSE(j.at("checks").empty());
}

TEST_F(CliTest, UnknownFlagFails) {
  const auto r = run({"plan", "--model", "bert", "--s", "64", "--bogus"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  EXPECT_NE(run({}).code, 0);
  EXPECT_NE(run({"frobnicate"}).code, 0);
}

TEST_F(CliTest, HelpListsEveryFlag) {
  const auto r = run({"simulate", "--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--model", "--hidden", "--heads", "--layers", "--b", "--p", "--capacity-gb",
                           "--strategies", "--dataset", "--samples", "--seed", "--gamma", "--mode",
                           "--bundle", "--headroom", "--no-smoothing", "--out"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  const auto top = run({"--help"});
  EXPECT_EQ(top.code, 0);
  for (const char* cmd : {"profile", "fit", "plan", "simulate", "verify", "report"}) {
    EXPECT_NE(top.out.find(cmd), std::string::npos) << cmd;
  }
}

TEST_F(CliTest, SimulateIsByteIdenticalForSeed) {
  const std::vector<std::string> base{"simulate", "--model", "gpt", "--dataset", "grch38",
                                      "--samples", "200", "--seed", "7"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", path("a.jsonl")});
  b.insert(b.end(), {"--out", path("b.jsonl")});
  const auto ra = run(a), rb = run(b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  const auto ta = slurp(path("a.jsonl"));
  EXPECT_FALSE(ta.empty());
  EXPECT_EQ(ta, slurp(path("b.jsonl")));
  EXPECT_EQ(ra.out, rb.out);
  const auto summary = nlohmann::json::parse(ra.out);
  // The trace ends at the first out-of-memory sequence, if any.
  const auto sequences = summary.at("sequences").get<int>();
  EXPECT_GT(sequences, 0);
  EXPECT_LE(sequences, 200);
  EXPECT_EQ(std::count(ta.begin(), ta.end(), '\n'), sequences);
  EXPECT_EQ(summary.at("redistribution_ops").get<int>(), 0);
}

TEST_F(CliTest, ProfileFitPlanPipeline) {
  const std::vector<std::string> model{"-h", "256", "-n", "8", "-L", "4"};
  auto profile = std::vector<std::string>{"profile"};
  profile.insert(profile.end(), model.begin(), model.end());
  profile.insert(profile.end(), {"--lengths", "1024,2048,4096,8192,16384", "--out", path("p.csv")});
  ASSERT_EQ(run(profile).code, 0);
  EXPECT_EQ(slurp(path("p.csv")).rfind("strategy,h,n,L,b,s,time_s,mem_bytes", 0), 0u);

  const auto fit = run({"fit", "--profiles", path("p.csv"), "--out", path("bundle.json")});
  ASSERT_EQ(fit.code, 0) << fit.err;

  auto plan = std::vector<std::string>{"plan"};
  plan.insert(plan.end(), model.begin(), model.end());
  plan.insert(plan.end(), {"--s", "32768", "--bundle", path("bundle.json")});
  const auto r = run(plan);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("layers").size(), 4u);

  const auto report_in = path("t.csv");
  auto sim = std::vector<std::string>{"simulate"};
  sim.insert(sim.end(), model.begin(), model.end());
  sim.insert(sim.end(), {"--bundle", path("bundle.json"), "--samples", "50", "--out", report_in});
  ASSERT_EQ(run(sim).code, 0);
  const auto rep = run({"report", "--trace", report_in});
  ASSERT_EQ(rep.code, 0) << rep.err;
  EXPECT_EQ(nlohmann::json::parse(rep.out).at("sequences").get<int>(), 50);
}

TEST_F(CliTest, ErrorsNameFileAndLine) {
  {
    std::ofstream f(path("bad.csv"));
    f << "strategy,h,n,L,b,s,time_s,mem_bytes\nMETP,1,2\n";
  }
  const auto r = run({"fit", "--profiles", path("bad.csv")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("bad.csv:2"), std::string::npos) << r.err;

  const auto d = run({"simulate", "--model", "bert", "--dataset", path("nope.json")});
  EXPECT_NE(d.code, 0);
  EXPECT_NE(d.err.find("nope.json"), std::string::npos) << d.err;

  const auto both = run({"plan", "--model", "bert", "-h", "64", "--s", "64"});
  EXPECT_NE(both.code, 0);
}

}  // namespace
}  // namespace hotswitch
