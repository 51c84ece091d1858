// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, each with its time
// limit. Exits nonzero if any criterion fails.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "hotswitch/costmodel.hpp"
#include "hotswitch/layouts.hpp"
#include "hotswitch/polyfit.hpp"
#include "hotswitch/runtime.hpp"
#include "hotswitch/selector.hpp"
#include "hotswitch/strategies.hpp"
#include "oracles.hpp"

namespace hs = hotswitch;
namespace oracle = hotswitch::testing;

namespace {

/// Collects failed checks of one criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void note(std::string text) { notes_.push_back(std::move(text)); }
  bool ok() const { return failed_ == 0; }
  std::string detail() const {
    std::string out = std::to_string(count_ - failed_) + "/" + std::to_string(count_) + " checks";
    for (const auto& n : notes_) out += "; " + n;
    for (const auto& f : failures_) out += "; FAILED: " + f;
    return out;
  }

 private:
  int count_ = 0;
  int failed_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<void(Check&)> body;
};

std::string fmt(double v, const char* spec = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// ------------------------------------------------------------ helpers

struct OpRun {
  hs::SimTensor out;
  std::vector<hs::CommRecord> log;
  std::int64_t act_peak = 0;  // elements
};

OpRun run_op(hs::Strategy s, hs::OpKind op, const hs::SimTensor& x, const hs::DenseWeights& dw,
             const hs::ModelConfig& cfg, int p) {
  const auto sl = x.shape[1];
  hs::DeviceGrid grid(p, std::int64_t{1} << 40, 2);
  const auto w = hs::LayerWeights::from_dense(dw, cfg, grid);
  const auto xs = hs::shard(x, hs::spec_layout(hs::Role::XMha, cfg, sl, p), grid);
  const auto y = op == hs::OpKind::MHA ? hs::mha(s, grid, xs, w, cfg) : hs::ffn(s, grid, xs, w, cfg);
  OpRun r;
  r.out = hs::unshard(y, hs::spec_layout(op == hs::OpKind::MHA ? hs::Role::O : hs::Role::Z, cfg, sl, p));
  r.log = grid.comm_log();
  r.act_peak = grid.max_peak_bytes(hs::MemKind::Activation) / 2;
  return r;
}

/// Primitives each strategy is documented to use inside its operators.
std::set<hs::Primitive> documented_primitives(hs::Strategy s) {
  using P = hs::Primitive;
  switch (s) {
    case hs::Strategy::MegatronTS: return {P::AllGather, P::ReduceScatter};
    case hs::Strategy::MegatronCZ: return {P::AllGather, P::RingPass};
    case hs::Strategy::UlyssesZ: return {P::AllGather, P::AllToAll};
    case hs::Strategy::ColossalZ: return {P::AllGather, P::RingPass};
    case hs::Strategy::METP: return {P::RingPass};
  }
  return {};
}

hs::ModelConfig layers(std::int64_t L) { return {8, 2, L, 1}; }

// ---------------------------------------------------------- criteria

void layout_table(Check& c) {
  std::ifstream in(std::string(HOTSWITCH_FIXTURE_DIR) + "/layout_table.json");
  const auto fixture = nlohmann::json::parse(in);
  const hs::ModelConfig cfg{1024, 16, 24, 4};
  const hs::Role columns[] = {hs::Role::XMha, hs::Role::WQkv, hs::Role::WProj, hs::Role::WIn,
                              hs::Role::WOut};
  const auto& rows = fixture.at("rows");
  c.expect(rows.size() == std::size(hs::kAllMethods) + 1, "fixture row count");
  int cells = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const bool spec_row = r == std::size(hs::kAllMethods);
    if (!spec_row) {
      c.expect(rows[r][0].get<std::string>() == hs::method_name(hs::kAllMethods[r]),
               "method name row " + std::to_string(r));
    }
    for (std::size_t col = 0; col < std::size(columns); ++col) {
      const auto want = rows[r][col + 1].get<std::string>();
      auto roles = std::vector<hs::Role>{columns[col]};
      if (col == 0) roles.insert(roles.end(), {hs::Role::O, hs::Role::XFfn, hs::Role::Z});
      for (hs::Role role : roles) {
        const auto got = spec_row ? hs::spec_layout(role, cfg, 8, 4)
                                  : hs::method_layout(hs::kAllMethods[r], role, cfg, 8, 4);
        c.expect(got.symbolic() == want, rows[r][0].get<std::string>() + "/" +
                                             std::string(hs::role_name(role)) + ": " +
                                             got.symbolic() + " != " + want);
      }
      ++cells;
    }
  }
  c.note(std::to_string(cells) + " cells");
}

void layout_closure(Check& c) {
  std::mt19937_64 rng(21);
  for (int p : {1, 2, 4}) {
    const hs::ModelConfig cfg{16, 4, 2, 1};
    const std::int64_t sl = 8;
    std::vector<hs::DenseWeights> dense{hs::DenseWeights::random(cfg, rng),
                                        hs::DenseWeights::random(cfg, rng)};
    const auto x = hs::random_tensor({1, sl, 16}, rng);
    for (hs::Strategy a : hs::kAllStrategies) {
      for (hs::Strategy b : hs::kAllStrategies) {
        const std::string tag = std::string(hs::strategy_name(a)) + "->" +
                                std::string(hs::strategy_name(b)) + " p=" + std::to_string(p);
        c.expect(hs::compatible(hs::spec_layout(hs::Role::Z, cfg, sl, p),
                                hs::spec_layout(hs::Role::XMha, cfg, sl, p)),
                 tag + " Z->X_MHA");
        c.expect(hs::compatible(hs::spec_layout(hs::Role::O, cfg, sl, p),
                                hs::spec_layout(hs::Role::XFfn, cfg, sl, p)),
                 tag + " O->X_FFN");
        // The producer's actual shards are readable by the consumer as-is.
        hs::DeviceGrid grid(p, std::int64_t{1} << 40);
        const auto w0 = hs::LayerWeights::from_dense(dense[0], cfg, grid);
        auto h = hs::shard(x, hs::spec_layout(hs::Role::XMha, cfg, sl, p), grid);
        h = hs::ffn(a, grid, hs::mha(a, grid, h, w0, cfg), w0, cfg);
        bool conforms = true;
        try {
          hs::check_conformance(h, hs::spec_layout(hs::Role::XMha, cfg, sl, p));
        } catch (const std::exception&) {
          conforms = false;
        }
        const auto w1 = hs::LayerWeights::from_dense(dense[1], cfg, grid);
        try {
          h = hs::ffn(b, grid, hs::mha(b, grid, h, w1, cfg), w1, cfg);
          hs::check_conformance(h, hs::spec_layout(hs::Role::Z, cfg, sl, p));
        } catch (const std::exception&) {
          conforms = false;
        }
        c.expect(conforms, tag + " shards conform");
      }
    }
  }
}

void numeric_equivalence(Check& c) {
  double worst = 0;
  for (hs::Strategy s : hs::kAllStrategies) {
    for (int p : {1, 2, 4}) {
      std::mt19937_64 rng(1000 + 10 * p + static_cast<int>(s));
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::int64_t> heads;
        for (std::int64_t n : {2, 4}) {
          if (n % p == 0) heads.push_back(n);
        }
        const std::int64_t n = heads[rng() % heads.size()];
        const std::int64_t d = 1 + static_cast<std::int64_t>(rng() % (32 / n));
        const hs::ModelConfig cfg{n * d, n, 1, 1 + static_cast<std::int64_t>(rng() % 2)};
        const std::int64_t sl = p * (1 + static_cast<std::int64_t>(rng() % (64 / p)));
        const auto dw = hs::DenseWeights::random(cfg, rng);
        const auto x = hs::random_tensor({cfg.b, sl, cfg.h}, rng);
        const std::string tag = std::string(hs::strategy_name(s)) + " p=" + std::to_string(p) +
                                " h=" + std::to_string(cfg.h) + " s=" + std::to_string(sl);
        const double e_mha = oracle::rel_err(run_op(s, hs::OpKind::MHA, x, dw, cfg, p).out,
                                             oracle::naive_mha(x, dw.w_qkv, dw.w_proj, n));
        const double e_ffn = oracle::rel_err(run_op(s, hs::OpKind::FFN, x, dw, cfg, p).out,
                                             oracle::naive_ffn(x, dw.w_in, dw.w_out));
        worst = std::max({worst, e_mha, e_ffn});
        c.expect(e_mha < 1e-9, tag + " MHA err " + fmt(e_mha));
        c.expect(e_ffn < 1e-9, tag + " FFN err " + fmt(e_ffn));
      }
    }
  }
  c.note("max rel err " + fmt(worst));
}

void chain_equivalence(Check& c) {
  std::mt19937_64 rng(4242);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int p = std::vector<int>{1, 2, 4}[trial % 3];
    const std::int64_t n = 4;
    const hs::ModelConfig cfg{n * (1 + static_cast<std::int64_t>(rng() % 8)), n, 4,
                              1 + static_cast<std::int64_t>(rng() % 2)};
    const std::int64_t sl = p * (1 + static_cast<std::int64_t>(rng() % (64 / p)));
    std::vector<hs::Strategy> chain;
    for (int l = 0; l < 4; ++l) chain.push_back(hs::kAllStrategies[rng() % 5]);
    const auto x = hs::random_tensor({cfg.b, sl, cfg.h}, rng);
    hs::DeviceGrid grid(p, std::int64_t{1} << 40);
    auto h = hs::shard(x, hs::spec_layout(hs::Role::XMha, cfg, sl, p), grid);
    hs::SimTensor expect = x;
    std::vector<hs::CommStep> schedule;
    for (int l = 0; l < 4; ++l) {
      const auto dw = hs::DenseWeights::random(cfg, rng);
      const auto w = hs::LayerWeights::from_dense(dw, cfg, grid);
      h = hs::ffn(chain[l], grid, hs::mha(chain[l], grid, h, w, cfg), w, cfg);
      expect = oracle::naive_ffn(oracle::naive_mha(expect, dw.w_qkv, dw.w_proj, n), dw.w_in,
                                 dw.w_out);
      for (hs::OpKind op : {hs::OpKind::MHA, hs::OpKind::FFN}) {
        const auto steps = hs::comm_schedule(chain[l], op, cfg, sl, p, grid.bytes_per_elem());
        schedule.insert(schedule.end(), steps.begin(), steps.end());
      }
    }
    std::string tag = "p=" + std::to_string(p) + " chain";
    for (auto s : chain) tag += " " + std::string(hs::strategy_name(s));
    const double err = oracle::rel_err(hs::unshard(h, hs::spec_layout(hs::Role::Z, cfg, sl, p)), expect);
    worst = std::max(worst, err);
    c.expect(err < 1e-9, tag + " err " + fmt(err));
    const auto& log = grid.comm_log();
    bool same = log.size() == schedule.size();
    for (std::size_t i = 0; same && i < log.size(); ++i) {
      same = log[i].primitive == schedule[i].primitive && log[i].bytes == schedule[i].bytes;
    }
    c.expect(same, tag + " comm log differs from intra-op schedule");
    std::set<hs::Primitive> allowed;
    for (auto s : chain) {
      const auto d = documented_primitives(s);
      allowed.insert(d.begin(), d.end());
    }
    for (const auto& r : log) {
      c.expect(allowed.count(r.primitive) == 1,
               tag + " undocumented " + std::string(hs::primitive_name(r.primitive)));
    }
  }
  c.note("max rel err " + fmt(worst));
}

void selector_fidelity(Check& c) {
  std::mt19937_64 rng(5150);
  double worst_gap = 0;
  int gaps = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = oracle::random_table(rng, 1 + rng() % 5);
    const std::int64_t L = 1 + static_cast<std::int64_t>(rng() % 8);
    std::uniform_real_distribution<double> cap(1.0 * L, 20.0 * L);
    const double capacity = cap(rng);
    oracle::TableProvider models(t);
    hs::PlanCache cache;
    const auto plan = hs::select_plan(1, 1, layers(L), models, cache, capacity);
    const auto cs = oracle::enumerate_candidates(t, L, capacity);
    const std::string tag = "trial " + std::to_string(trial);
    std::vector<hs::Strategy> expect;
    if (!cs.early.empty()) {
      expect = cs.early;
    } else if (cs.feasible.empty()) {
      expect.assign(static_cast<std::size_t>(L), cs.order.back());
    } else {
      double best = 1e300;
      for (const auto& cand : cs.feasible) {
        const double tm = oracle::fold_time(cand, t);
        if (tm < best) {
          best = tm;
          expect = cand;
        }
      }
      c.expect(plan.predicted_time_s == best, tag + " time differs from least-time candidate");
    }
    c.expect(plan.per_layer == expect, tag + " plan differs from enumerated optimum");
    const auto bf = hs::brute_force_plan(1, 1, layers(L), models, capacity);
    if (bf && oracle::fold_mem(plan.per_layer, t) < capacity) {
      c.expect(bf->predicted_time_s <= plan.predicted_time_s + 1e-12, tag + " brute force worse");
      const double gap = (plan.predicted_time_s - bf->predicted_time_s) / bf->predicted_time_s;
      worst_gap = std::max(worst_gap, gap);
      if (gap > 1e-12) ++gaps;
    }
  }
  c.note("heuristic gap > 0 in " + std::to_string(gaps) + " tables, max " + fmt(100 * worst_gap) +
         "%");
}

void optimization_contracts(Check& c) {
  using S = hs::Strategy;
  const hs::CostTable fast_fits{{S::MegatronTS, {1, 1}}, {S::METP, {2, 0.5}}, {S::UlyssesZ, {3, 0.25}}};
  for (std::int64_t L : {4, 16, 64, 256}) {
    oracle::TableProvider models(fast_fits);
    hs::PlanCache cache;
    hs::SelectionCounters k;
    hs::SelectOptions opt;
    opt.counters = &k;
    hs::select_plan(1, 10, layers(L), models, cache, 1e9, opt);
    c.expect(k.layer_evaluations == L, "early termination evaluates L layers at L=" + std::to_string(L));
    c.expect(models.calls == 3, "early termination queries |P| models");
    // Cache hit: no model calls at all.
    hs::SelectionCounters k2;
    opt.counters = &k2;
    const auto calls = models.calls;
    hs::select_plan(1, 10, layers(L), models, cache, 1e9, opt);
    c.expect(models.calls == calls && k2.cache_hits == 1 && k2.layer_evaluations == 0,
             "cache hit makes 0 model calls at L=" + std::to_string(L));
  }
  // OOM short-circuit: 10 x {mem 10} against capacity 15 stops after 2 layers.
  hs::SelectionCounters k3;
  const bool fits = hs::plan_feasible(std::vector<S>(10, S::MegatronTS),
                                      hs::CostTable{{S::MegatronTS, {1, 10}}}, 15, &k3);
  c.expect(!fits && k3.layer_evaluations == 2, "OOM short-circuit at first infeasible prefix");
  // Smoothing: previous plan 3.1 s vs new optimum 3.05 s is within 5%.
  oracle::TableProvider models({{S::MegatronTS, {1, 10}}, {S::METP, {1.05, 4}}});
  hs::PlanCache cache;
  hs::StrategyPlan prev;
  prev.per_layer = {S::MegatronTS, S::METP, S::METP};
  hs::SelectionCounters k4;
  hs::SelectOptions opt;
  opt.prev_plan = &prev;
  opt.counters = &k4;
  opt.gamma = 0.05;
  const auto kept = hs::select_plan(1, 100, layers(3), models, cache, 25, opt);
  c.expect(kept.per_layer == prev.per_layer && k4.smoothing_retained == 1,
           "smoothing retains previous plan within 5%");
  hs::PlanCache fresh;
  prev.per_layer = {S::METP, S::METP, S::METP};  // 3.15 s, 3.3% slower: kept
  hs::SelectionCounters k5;
  opt.counters = &k5;
  hs::select_plan(1, 100, layers(3), models, fresh, 25, opt);
  c.expect(k5.smoothing_retained == 1, "smoothing retains at the 5% edge");
  hs::PlanCache fresh2;
  prev.per_layer = {S::METP, S::METP, S::METP};
  oracle::TableProvider slow({{S::MegatronTS, {1, 10}}, {S::METP, {1.2, 4}}});
  hs::SelectionCounters k6;
  opt.counters = &k6;
  const auto replaced = hs::select_plan(1, 100, layers(3), slow, fresh2, 25, opt);
  c.expect(k6.smoothing_retained == 0 && replaced.per_layer != prev.per_layer,
           "smoothing replaces a plan more than 5% slower");
}

void hybrid_dispatch(Check& c) {
  const hs::ModelConfig bert{1024, 16, 24, 1};
  const hs::GridParams grid;
  std::vector<std::int64_t> lengths;
  for (std::int64_t s = 1024; s <= 65536; s += 1024) lengths.push_back(s);
  const auto records = hs::profile_sweep(bert, hs::evaluation_strategies(), 1, lengths, grid);
  const auto bundle = hs::CostModelBundle::fit(records, bert, static_cast<double>(grid.capacity_bytes));
  for (hs::Strategy st : bundle.strategies()) {
    const auto& m = bundle.model(st);
    const auto smax = m.s_profile_max();
    hs::Branch at, past;
    m.predict(smax, hs::Target::Time, &at);
    m.predict(smax + 1, hs::Target::Time, &past);
    c.expect(smax == 65536 && at == hs::Branch::Forest && past == hs::Branch::Poly,
             std::string(hs::strategy_name(st)) + " branch boundary");
  }
  // AIC oracle: n ln(RSS/n) + 2(d+1), exact fits floored at n (1e-9 max|y|)^2.
  std::vector<double> s, lin, quad;
  for (int i = 1; i <= 6; ++i) {
    s.push_back(i);
    lin.push_back(2.0 + 3.0 * i);
    quad.push_back(static_cast<double>(i * i));
  }
  const auto ml = hs::fit_poly(s, lin);
  const double floor_lin = 6 * std::log(std::pow(20e-9, 2));
  c.expect(ml.degree == 1, "linear data selects degree 1");
  c.expect(std::abs(ml.aic[0] - (floor_lin + 4)) < 1e-6 && std::abs(ml.aic[1] - (floor_lin + 6)) < 1e-6,
           "linear AIC matches hand values");
  const auto mq = hs::fit_poly(s, quad);
  const double rss1 = 112.0 / 3.0;  // least-squares line through (i, i^2), i = 1..6
  c.expect(mq.degree == 2, "quadratic data selects degree 2");
  c.expect(std::abs(mq.aic[0] - (6 * std::log(rss1 / 6) + 4)) < 1e-9, "quadratic AIC degree 1");
  c.expect(std::abs(mq.aic[1] - (6 * std::log(std::pow(36e-9, 2)) + 6)) < 1e-6,
           "quadratic AIC degree 2");
  // Forest determinism under seed 42.
  const auto again = hs::CostModelBundle::fit(records, bert, static_cast<double>(grid.capacity_bytes));
  bool same = true;
  for (hs::Strategy st : bundle.strategies()) {
    for (std::int64_t q : {1024, 4000, 33333, 65536}) {
      same = same && bundle.model(st).predict(q, hs::Target::Time) ==
                         again.model(st).predict(q, hs::Target::Time) &&
             bundle.model(st).predict(q, hs::Target::Memory) ==
                 again.model(st).predict(q, hs::Target::Memory);
    }
  }
  c.expect(same, "forest fit with seed 42 is deterministic");
}

void ablation_direction(Check& c) {
  const hs::ModelConfig gpt{12288, 96, 96, 1};
  const hs::GridParams grid;
  const auto strategies = hs::evaluation_strategies();
  const auto lengths = hs::default_profile_lengths();
  const auto records = hs::profile_sweep(gpt, strategies, 1, lengths, grid);
  hs::ForestParams fp;
  fp.seed = 42;
  const auto bundle =
      hs::CostModelBundle::fit(records, gpt, static_cast<double>(grid.capacity_bytes), fp);
  const auto data = hs::load_dataset(hs::DatasetSpec::grch38(1000), 42);
  const hs::SimOptions opt;
  const auto rows = hs::ablation_table(data, gpt, grid, bundle, opt);
  std::map<std::string, hs::AblationRow> by;
  for (const auto& r : rows) by[r.label] = r;
  c.expect(by.count("full") && by.count("w/o METP") && by.count("w/o MegatronTS"), "ablation rows");
  const auto& full = by["full"];
  const auto& no_metp = by["w/o METP"];
  const auto& no_ts = by["w/o MegatronTS"];
  c.expect(no_metp.seq_len < full.seq_len, "w/o METP max length " + std::to_string(no_metp.seq_len) +
                                               " not below " + std::to_string(full.seq_len));
  c.expect(no_ts.time_s > no_ts.time_full_s, "w/o MegatronTS time not above full");
  c.note("max length full " + std::to_string(full.seq_len) + " vs w/o METP " +
         std::to_string(no_metp.seq_len) + "; w/o MegatronTS saving " + fmt(100 * no_ts.saving) + "%");
}

void memory_ordering(Check& c) {
  using S = hs::Strategy;
  for (int p : {2, 4}) {
    const hs::ModelConfig cfg{16, 4, 1, 1};
    std::mt19937_64 rng(77);
    const auto dw = hs::DenseWeights::random(cfg, rng);
    auto act = [&](S s, std::int64_t sl) {
      const auto x = hs::random_tensor({1, sl, 16}, rng);
      return std::max(run_op(s, hs::OpKind::MHA, x, dw, cfg, p).act_peak,
                      run_op(s, hs::OpKind::FFN, x, dw, cfg, p).act_peak);
    };
    for (std::int64_t sl : {16, 32, 64, 128}) {
      const auto m = act(S::METP, sl), u = act(S::UlyssesZ, sl), t = act(S::MegatronTS, sl);
      c.expect(m <= u && u <= t, "p=" + std::to_string(p) + " s=" + std::to_string(sl) + ": " +
                                     std::to_string(m) + ", " + std::to_string(u) + ", " +
                                     std::to_string(t));
    }
    auto mha_act = [&](S s, std::int64_t sl) {
      const auto x = hs::random_tensor({1, sl, 16}, rng);
      return static_cast<double>(run_op(s, hs::OpKind::MHA, x, dw, cfg, p).act_peak);
    };
    const double colossal = mha_act(S::ColossalZ, 256) / mha_act(S::ColossalZ, 128);
    c.expect(colossal > 2.5, "ColossalZ doubling ratio " + fmt(colossal));
    double worst_linear = 0;
    for (S s : {S::MegatronTS, S::MegatronCZ, S::UlyssesZ, S::METP}) {
      const double r = mha_act(s, 256) / mha_act(s, 128);
      worst_linear = std::max(worst_linear, r);
      c.expect(r < 2.05, std::string(hs::strategy_name(s)) + " doubling ratio " + fmt(r));
    }
    if (p == 4) {
      c.note("ColossalZ doubling ratio " + fmt(colossal) + ", others <= " + fmt(worst_linear));
    }
  }
}

void case_study(Check& c) {
  const hs::ColdRestartModel cold;
  c.expect(cold.total_s() > 31.0, "cold restart total " + fmt(cold.total_s()));
  c.expect(std::abs(cold.reinit_share() - 0.702) < 0.005, "reinit share " + fmt(cold.reinit_share()));
  hs::TrainingTrace trace;
  trace.plan_changes = 3;
  const auto r = hs::switch_overhead_report(trace, cold);
  c.expect(std::abs(r.cold_total_s - 3 * cold.total_s()) < 1e-12, "k switches cost k restarts");
  c.note("restart " + fmt(cold.total_s(), "%.2f") + " s, reinit " +
         fmt(100 * cold.reinit_share(), "%.1f") + "%");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(Check& c) {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "hotswitch_acceptance";
  fs::create_directories(dir);
  std::vector<std::string> traces;
  for (const char* name : {"a.jsonl", "b.jsonl"}) {
    const auto path = (dir / name).string();
    std::vector<std::string> args{"simulate", "--model", "gpt", "--dataset", "grch38",
                                  "--samples", "1000", "--seed", "7", "--out", path};
    std::ostringstream out, err;
    const int code = hotswitch::cli::run(args, out, err);
    c.expect(code == 0, std::string("simulate exit code ") + std::to_string(code) + " " + err.str());
    traces.push_back(slurp(path));
  }
  c.expect(!traces[0].empty(), "trace is empty");
  c.expect(traces[0] == traces[1], "traces differ");
  c.note(std::to_string(traces[0].size()) + " bytes");
  fs::remove_all(dir);
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "layout table conformance", 1, layout_table},
      {2, "layout closure", 1, layout_closure},
      {3, "strategy numeric equivalence", 30, numeric_equivalence},
      {4, "hot-switch chain equivalence", 30, chain_equivalence},
      {5, "selection fidelity", 10, selector_fidelity},
      {6, "optimization contracts", 5, optimization_contracts},
      {7, "hybrid dispatch", 10, hybrid_dispatch},
      {8, "ablation directions", 60, ablation_direction},
      {9, "memory ordering", 10, memory_ordering},
      {10, "case-study accounting", 1, case_study},
      {11, "end-to-end determinism", 30, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    check.expect(dt < cr.limit_s, "exceeded time limit");
    const bool ok = check.ok();
    if (!ok) ++failed;
    std::printf("[%s] %2d %-30s (%.3f s / %.0f s) %s\n", ok ? "PASS" : "FAIL", cr.id, cr.name, dt,
                cr.limit_s, check.detail().c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
