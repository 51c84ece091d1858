// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/costmodel.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hotswitch {
namespace {

const ModelConfig kBert{1024, 16, 24, 1};
const ModelConfig kGpt{12288, 96, 96, 1};

TEST(Analytic, FlopsByHand) {
  EXPECT_DOUBLE_EQ(layer_forward_flops({2, 1, 1, 1}, 1, 3), 24 * 3 * 4 + 4 * 9 * 2);
  EXPECT_DOUBLE_EQ(layer_forward_flops(kBert, 2, 1024),
                   24.0 * 2 * 1024 * 1024.0 * 1024 + 4.0 * 2 * 1024 * 1024.0 * 1024);
}

TEST(Analytic, MegatronTimeFromFirstPrinciples) {
  GridParams g;
  const std::int64_t s = 8192;
  const auto r = analytic_profile(kBert, Strategy::MegatronTS, 1, s, g);
  // All-gather then reduce-scatter of the b x s x h activation per sublayer.
  const double coll = g.alpha_s + (7.0 / 8.0) * s * 1024 * 2 / g.bytes_per_s_link;
  const double flops = 24.0 * s * 1024.0 * 1024 + 4.0 * s * s * 1024.0;
  const double expect = 24 * (3 * flops / (g.flops_per_s * 8) + 4 * coll);
  EXPECT_NEAR(r.time_s, expect, 1e-12 * expect);
}

TEST(Analytic, MemoryBreakdownByHand) {
  GridParams g;
  const auto br = analytic_breakdown(kBert, Strategy::METP, 1, 8192, g);
  EXPECT_DOUBLE_EQ(br.param_bytes, 2.0 * 12 * 1024.0 * 1024 * 24 / 8);
  EXPECT_DOUBLE_EQ(br.saved_bytes, 2.0 * 24 * 2 * (8192.0 / 8) * 1024);
  const auto ts = analytic_breakdown(kBert, Strategy::MegatronTS, 1, 8192, g);
  EXPECT_DOUBLE_EQ(ts.saved_bytes, 2.0 * 24 * 10 * (8192.0 / 8) * 1024);
  const auto col = analytic_breakdown(kBert, Strategy::ColossalZ, 1, 8192, g);
  EXPECT_DOUBLE_EQ(col.saved_bytes,
                   2.0 * 24 * (10 * 1024.0 * 1024 + 16.0 * 1024 * 8192));
  const auto pk = executor_peak(Strategy::METP, OpKind::MHA, kBert, 8192, 8);
  const auto pf = executor_peak(Strategy::METP, OpKind::FFN, kBert, 8192, 8);
  EXPECT_DOUBLE_EQ(br.transient_bytes,
                   2.0 * std::max(pk.activation + pk.parameter, pf.activation + pf.parameter));
  EXPECT_DOUBLE_EQ(br.mem_bytes(), br.param_bytes + br.saved_bytes + br.transient_bytes);
}

TEST(Analytic, MonotoneInSequenceLength) {
  GridParams g;
  for (const auto& cfg : {kBert, kGpt}) {
    for (Strategy st : kAllStrategies) {
      double t = 0, m = 0;
      for (std::int64_t s : default_profile_lengths()) {
        const auto r = analytic_profile(cfg, st, 1, s, g);
        EXPECT_GE(r.time_s, t);
        EXPECT_GE(r.mem_bytes, m);
        t = r.time_s;
        m = r.mem_bytes;
      }
    }
  }
}

TEST(Analytic, UniformPlanCostEqualsProfile) {
  GridParams g;
  for (Strategy st : kAllStrategies) {
    const std::vector<Strategy> plan(24, st);
    const auto c = analytic_plan_cost(plan, kBert, 1, 16384, g);
    const auto r = analytic_profile(kBert, st, 1, 16384, g);
    EXPECT_NEAR(c.time_s, r.time_s, 1e-12 * r.time_s);
    EXPECT_NEAR(c.mem_bytes, r.mem_bytes, 1e-9 * r.mem_bytes);
  }
  EXPECT_THROW(analytic_plan_cost(std::vector<Strategy>(3), kBert, 1, 1024, g),
               std::invalid_argument);
}

TEST(Analytic, MixedPlanSumsSavedAndMaxesTransient) {
  GridParams g;
  std::vector<Strategy> plan(24, Strategy::MegatronTS);
  std::fill(plan.begin() + 12, plan.end(), Strategy::METP);
  const auto ts = analytic_breakdown(kBert, Strategy::MegatronTS, 1, 32768, g);
  const auto me = analytic_breakdown(kBert, Strategy::METP, 1, 32768, g);
  const auto c = analytic_plan_cost(plan, kBert, 1, 32768, g);
  EXPECT_NEAR(c.time_s, 0.5 * (ts.time_s() + me.time_s()), 1e-12);
  EXPECT_NEAR(c.mem_bytes,
              ts.param_bytes + 0.5 * (ts.saved_bytes + me.saved_bytes) +
                  std::max(ts.transient_bytes, me.transient_bytes),
              1.0);
}

TEST(Sweep, DefaultLengthsAndOomStop) {
  const auto lengths = default_profile_lengths();
  EXPECT_EQ(lengths.front(), 1024);
  EXPECT_EQ(lengths.back(), 1024 * 1024);
  EXPECT_TRUE(std::is_sorted(lengths.begin(), lengths.end()));
  for (auto s : lengths) EXPECT_EQ(s % 128, 0);
  EXPECT_EQ(lengths.size(), 81u);

  GridParams g;
  const std::vector<Strategy> st{Strategy::MegatronTS};
  const auto recs = profile_sweep(kGpt, st, 1, lengths, g);
  ASSERT_FALSE(recs.empty());
  for (const auto& r : recs) EXPECT_LE(r.mem_bytes, static_cast<double>(g.capacity_bytes));
  const auto next = std::upper_bound(lengths.begin(), lengths.end(), recs.back().s);
  ASSERT_NE(next, lengths.end());
  EXPECT_GT(analytic_profile(kGpt, Strategy::MegatronTS, 1, *next, g).mem_bytes,
            static_cast<double>(g.capacity_bytes));
  // Indivisible lengths are skipped, not fatal.
  const std::vector<std::int64_t> odd{1001, 1024};
  EXPECT_EQ(profile_sweep(kBert, st, 1, odd, g).size(), 1u);
}

std::vector<ProfileRecord> five_records() {
  GridParams g;
  std::vector<ProfileRecord> out;
  for (std::int64_t s : {1024, 2048, 4096}) out.push_back(analytic_profile(kBert, Strategy::METP, 1, s, g));
  for (std::int64_t s : {1024, 2048}) out.push_back(analytic_profile(kBert, Strategy::UlyssesZ, 1, s, g));
  return out;
}

TEST(Csv, RoundTrip) {
  const auto recs = five_records();
  std::stringstream ss;
  write_profiles(ss, recs);
  EXPECT_EQ(ss.str().substr(0, kProfileCsvHeader.size()), kProfileCsvHeader);
  const auto back = read_profiles(ss);
  EXPECT_EQ(back, recs);
}

TEST(Csv, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "hotswitch_csv_rt.csv").string();
  const auto recs = five_records();
  export_profiles(path, recs);
  EXPECT_EQ(ingest_profiles(path), recs);
  std::remove(path.c_str());
  EXPECT_THROW(ingest_profiles(path), std::runtime_error);
}

void expect_error_at(const std::string& text, const std::string& where) {
  std::stringstream ss(text);
  try {
    read_profiles(ss, "p.csv");
    FAIL() << "expected an error for: " << text;
  } catch (const std::runtime_error& e) {
    EXPECT_EQ(std::string(e.what()).rfind(where, 0), 0u) << e.what();
  }
}

TEST(Csv, MalformedRowsNameTheLine) {
  const std::string h = std::string(kProfileCsvHeader) + "\n";
  expect_error_at("strategy,h\n", "p.csv:1:");
  expect_error_at(h + "METP,1024,16,24,1,1024,0.1,100\nMETP,1024,16\n", "p.csv:3:");
  expect_error_at(h + "Nope,1024,16,24,1,1024,0.1,100\n", "p.csv:2:");
  expect_error_at(h + "METP,1024,16,24,1,abc,0.1,100\n", "p.csv:2:");
  expect_error_at(h + "METP,1024,15,24,1,1024,0.1,100\n", "p.csv:2:");
  expect_error_at(h + "METP,1024,16,24,1,1024,-1,100\n", "p.csv:2:");
}

TEST(Csv, EmptyInputGivesNoRecordsAndFitFails) {
  std::stringstream empty;
  const auto recs = read_profiles(empty);
  EXPECT_TRUE(recs.empty());
  EXPECT_THROW(CostModelBundle::fit(recs, kBert, 1e9), std::invalid_argument);
}

CostModelBundle bert_bundle(std::vector<ProfileRecord>* out = nullptr) {
  GridParams g;
  const auto strategies = evaluation_strategies();
  std::vector<std::int64_t> lengths;
  for (std::int64_t s = 1024; s <= 65536; s += 1024) lengths.push_back(s);
  const auto recs = profile_sweep(kBert, strategies, 1, lengths, g);
  if (out) *out = recs;
  return CostModelBundle::fit(recs, kBert, static_cast<double>(g.capacity_bytes));
}

TEST(Hybrid, BranchBoundaryIsExact) {
  const auto bundle = bert_bundle();
  for (Strategy st : bundle.strategies()) {
    const auto& m = bundle.model(st);
    const auto smax = m.s_profile_max();
    EXPECT_EQ(smax, 65536);
    Branch b;
    m.predict(smax, Target::Time, &b);
    EXPECT_EQ(b, Branch::Forest);
    m.predict(smax + 1, Target::Time, &b);
    EXPECT_EQ(b, Branch::Poly);
    for (std::int64_t s = smax - 3; s <= smax + 3; ++s) {
      EXPECT_EQ(m.branch_for(s), s <= smax ? Branch::Forest : Branch::Poly);
    }
    m.predict(1024, Target::Memory, &b, true);
    EXPECT_EQ(b, Branch::Poly);
    EXPECT_EQ(m.predict(smax + 1, Target::Time), m.poly(Target::Time).predict(smax + 1.0));
  }
  EXPECT_EQ(branch_name(Branch::Forest), "forest");
}

TEST(Hybrid, ForestInterpolatesHeldOutLengths) {
  // 20 consecutive lengths of the default sweep from 8K; held-out lengths
  // between them are checked against the analytic generator.
  GridParams g;
  const auto strategies = evaluation_strategies();
  const auto sweep = default_profile_lengths();
  const auto from = std::find(sweep.begin(), sweep.end(), 8192);
  const std::vector<std::int64_t> lengths(from, from + 20);
  const auto recs = profile_sweep(kBert, strategies, 1, lengths, g);
  const auto bundle = CostModelBundle::fit(recs, kBert, static_cast<double>(g.capacity_bytes));
  for (Strategy st : strategies) {
    const auto& m = bundle.model(st);
    for (std::size_t k = 0; k + 1 < lengths.size(); ++k) {
      const auto mid = std::sqrt(static_cast<double>(lengths[k] * lengths[k + 1]));
      const std::int64_t s = static_cast<std::int64_t>(mid / 64) * 64;
      const auto truth = analytic_profile(kBert, st, 1, s, g);
      EXPECT_NEAR(m.predict(s, Target::Time), truth.time_s, 0.15 * truth.time_s) << s;
      EXPECT_NEAR(m.predict(s, Target::Memory), truth.mem_bytes, 0.15 * truth.mem_bytes) << s;
    }
  }
}

TEST(Hybrid, PolyExtrapolatesAnalyticTruth) {
  GridParams g;
  const auto bundle = bert_bundle();
  for (Strategy st : bundle.strategies()) {
    const auto& m = bundle.model(st);
    double prev_mem = 0;
    for (std::int64_t s : {98304, 131072, 196608, 262144}) {
      const auto truth = analytic_profile(kBert, st, 1, s, g);
      const double t = m.predict(s, Target::Time), mem = m.predict(s, Target::Memory);
      EXPECT_NEAR(t, truth.time_s, 0.1 * truth.time_s) << strategy_name(st) << " " << s;
      EXPECT_NEAR(mem, truth.mem_bytes, 0.1 * truth.mem_bytes) << strategy_name(st) << " " << s;
      EXPECT_GE(mem, prev_mem);
      prev_mem = mem;
    }
  }
}

TEST(Hybrid, OneHotEncoding) {
  std::vector<ProfileRecord> recs;
  bert_bundle(&recs);
  const auto enc = FeatureEncoder::fit(recs);
  EXPECT_EQ(enc.width(), 4u + 4u);
  for (Strategy st : evaluation_strategies()) {
    const auto x = enc.encode(kBert, st, 4096);
    EXPECT_EQ(std::count(x.begin(), x.begin() + 4, 1.0), 1);
    EXPECT_EQ(std::count(x.begin(), x.begin() + 4, 0.0), 3);
    EXPECT_GE(x[7], 0.0);
    EXPECT_LE(x[7], 1.0);
  }
  EXPECT_THROW(enc.encode(kBert, Strategy::ColossalZ, 4096), std::invalid_argument);
  const auto back = FeatureEncoder::from_json(enc.to_json());
  EXPECT_EQ(back.encode(kBert, Strategy::METP, 5000), enc.encode(kBert, Strategy::METP, 5000));
}

TEST(Hybrid, OomThresholdDefaultsToCapacity) {
  GridParams g;
  auto bundle = bert_bundle();
  auto& m = bundle.model(Strategy::MegatronTS);
  EXPECT_EQ(m.oom_threshold(), static_cast<double>(g.capacity_bytes));
  const double mem = m.predict(65536, Target::Memory);
  m.set_oom_threshold(mem * 0.99);
  EXPECT_TRUE(m.predicts_oom(65536));
  m.set_oom_threshold(mem * 1.01);
  EXPECT_FALSE(m.predicts_oom(65536));
}

TEST(Bundle, LayerCostIsWholeOverL) {
  const auto bundle = bert_bundle();
  const auto& m = bundle.model(Strategy::METP);
  const auto c = bundle.layer_cost(Strategy::METP, 1, 20000);
  EXPECT_DOUBLE_EQ(c.time_s, m.predict(20000, Target::Time) / 24);
  EXPECT_DOUBLE_EQ(c.mem_bytes, m.predict(20000, Target::Memory) / 24);
  EXPECT_THROW(bundle.layer_cost(Strategy::METP, 2, 20000), std::invalid_argument);
  EXPECT_THROW(bundle.model(Strategy::ColossalZ), std::out_of_range);
}

TEST(Bundle, ExportImportPreservesPredictions) {
  const auto bundle = bert_bundle();
  const auto path = (std::filesystem::temp_directory_path() / "hotswitch_bundle.json").string();
  bundle.save(path);
  const auto back = CostModelBundle::load(path);
  std::remove(path.c_str());
  EXPECT_EQ(back.strategies(), bundle.strategies());
  EXPECT_EQ(back.config(), bundle.config());
  for (Strategy st : bundle.strategies()) {
    for (std::int64_t s = 512; s <= 300000; s += 7919) {
      const auto a = bundle.layer_cost(st, 1, s), b = back.layer_cost(st, 1, s);
      EXPECT_EQ(a.time_s, b.time_s);
      EXPECT_EQ(a.mem_bytes, b.mem_bytes);
    }
  }
  EXPECT_THROW(CostModelBundle::from_json("{\"config\": 3}"), std::exception);
}

TEST(Bundle, PolyOnlyAndRestrictionBumpVersion) {
  auto bundle = bert_bundle();
  const auto v = bundle.version();
  bundle.set_poly_only(true);
  EXPECT_NE(bundle.version(), v);
  EXPECT_EQ(bundle.layer_cost(Strategy::METP, 1, 4096).time_s,
            bundle.model(Strategy::METP).poly(Target::Time).predict(4096) / 24);
  const std::vector<Strategy> keep{Strategy::METP, Strategy::UlyssesZ};
  const auto r = bundle.restricted(keep);
  EXPECT_EQ(r.strategies().size(), 2u);
  EXPECT_TRUE(r.poly_only());
}

TEST(Provider, AnalyticLayerCost) {
  GridParams g;
  AnalyticCostProvider p(kBert, g, evaluation_strategies());
  const auto c = p.layer_cost(Strategy::UlyssesZ, 1, 8192);
  const auto r = analytic_profile(kBert, Strategy::UlyssesZ, 1, 8192, g);
  EXPECT_DOUBLE_EQ(c.time_s, r.time_s / 24);
  EXPECT_DOUBLE_EQ(c.mem_bytes, r.mem_bytes / 24);
}

}  // namespace
}  // namespace hotswitch
