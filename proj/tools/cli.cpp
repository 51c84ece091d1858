// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "hotswitch/costmodel.hpp"
#include "hotswitch/layouts.hpp"
#include "hotswitch/runtime.hpp"
#include "hotswitch/selector.hpp"
#include "hotswitch/strategies.hpp"

namespace hotswitch::cli {
namespace {

using ojson = nlohmann::ordered_json;

struct Preset {
  std::string_view name;
  ModelConfig config;
};

constexpr Preset kPresets[] = {
    {"bert", {1024, 16, 24, 1}},
    {"llama", {8192, 64, 80, 1}},
    {"gpt", {12288, 96, 96, 1}},
};

struct ModelOptions {
  std::string model;
  std::int64_t h = 0;
  std::int64_t n = 0;
  std::int64_t L = 0;
  std::int64_t b = 1;
  int p = 8;
  double capacity_gb = 80.0;
  std::string strategies;
};

void add_model_options(CLI::App* app, ModelOptions& o) {
  app->add_option("--model", o.model, "Model preset: bert, llama or gpt");
  app->add_option("-h,--hidden", o.h, "Hidden size (with -n and -L instead of --model)");
  app->add_option("-n,--heads", o.n, "Attention heads");
  app->add_option("-L,--layers", o.L, "Transformer layers");
  app->add_option("--b", o.b, "Batch size")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--p", o.p, "Devices in the 1D grid")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--capacity-gb", o.capacity_gb, "Per-device memory in GiB")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app->add_option("--strategies", o.strategies,
                  "Comma-separated strategy names, or 'all' (default: evaluation set)");
}

bool explicit_dims(const ModelOptions& o) { return o.h != 0 || o.n != 0 || o.L != 0; }

/// nullopt when neither a preset nor explicit dimensions were given.
std::optional<ModelConfig> resolve_config(const ModelOptions& o) {
  if (!o.model.empty()) {
    if (explicit_dims(o)) throw std::invalid_argument("--model conflicts with -h/-n/-L");
    std::string key = o.model;
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (const auto& p : kPresets) {
      if (p.name == key) {
        ModelConfig c = p.config;
        c.b = o.b;
        return c;
      }
    }
    throw std::invalid_argument("unknown model preset '" + o.model +
                                "' (expected bert, llama or gpt)");
  }
  if (!explicit_dims(o)) return std::nullopt;
  if (o.h <= 0 || o.n <= 0 || o.L <= 0) {
    throw std::invalid_argument("-h, -n and -L must all be given and positive");
  }
  ModelConfig c{o.h, o.n, o.L, o.b};
  c.validate();
  return c;
}

ModelConfig require_config(const ModelOptions& o) {
  auto c = resolve_config(o);
  if (!c) throw std::invalid_argument("a model is required: pass --model or -h/-n/-L");
  return *c;
}

GridParams resolve_grid(const ModelOptions& o) {
  GridParams g;
  g.p = o.p;
  g.capacity_bytes = static_cast<std::int64_t>(std::llround(o.capacity_gb * 1073741824.0));
  return g;
}

std::vector<Strategy> resolve_strategies(const std::string& list) {
  if (list.empty()) return evaluation_strategies();
  if (list == "all") return {kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<Strategy> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto s = parse_strategy(item);
    if (!s) throw std::invalid_argument("unknown strategy '" + item + "'");
    if (std::find(out.begin(), out.end(), *s) == out.end()) out.push_back(*s);
  }
  if (out.empty()) throw std::invalid_argument("--strategies lists no strategy");
  return out;
}

std::vector<std::int64_t> parse_lengths(const std::string& list) {
  std::vector<std::int64_t> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    std::int64_t v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v <= 0) {
      throw std::invalid_argument("--lengths: '" + item + "' is not a positive integer");
    }
    out.push_back(v);
  }
  return out;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(path + ": cannot open for writing");
  f << text;
  if (!f) throw std::runtime_error(path + ": write failed");
}

std::string with_newline(std::string s) {
  if (s.empty() || s.back() != '\n') s += '\n';
  return s;
}

/// The bundle from `--bundle`, or one fitted on a fresh analytic sweep.
CostModelBundle obtain_bundle(const std::string& bundle_path, const ModelOptions& o,
                              ModelConfig& config, const GridParams& grid, std::uint64_t seed) {
  const auto strategies = resolve_strategies(o.strategies);
  if (!bundle_path.empty()) {
    CostModelBundle bundle = CostModelBundle::load(bundle_path);
    const auto requested = resolve_config(o);
    ModelConfig bc = bundle.config();
    if (requested && (requested->h != bc.h || requested->n != bc.n || requested->L != bc.L)) {
      throw std::invalid_argument(bundle_path + ": bundle was fitted for a different model");
    }
    if (bundle.batch() != o.b) {
      throw std::invalid_argument(bundle_path + ": bundle was fitted for b=" +
                                  std::to_string(bundle.batch()) + ", not b=" +
                                  std::to_string(o.b));
    }
    config = bc;
    if (!o.strategies.empty()) {
      const auto have = bundle.strategies();
      for (Strategy s : strategies) {
        if (std::find(have.begin(), have.end(), s) == have.end()) {
          throw std::invalid_argument(bundle_path + ": no model for strategy " +
                                      std::string(strategy_name(s)));
        }
      }
      bundle = bundle.restricted(strategies);
    }
    return bundle;
  }
  config = require_config(o);
  const auto lengths = default_profile_lengths();
  const auto records = profile_sweep(config, strategies, config.b, lengths, grid);
  if (records.empty()) {
    throw std::invalid_argument("no strategy can run this model on p=" + std::to_string(grid.p));
  }
  ForestParams params;
  params.seed = seed;
  return CostModelBundle::fit(records, config, static_cast<double>(grid.capacity_bytes), params);
}

std::vector<std::int64_t> resolve_dataset(const std::string& dataset, std::int64_t samples,
                                          std::uint64_t seed) {
  if (auto preset = DatasetSpec::preset(dataset, samples)) return load_dataset(*preset, seed);
  return load_dataset(DatasetSpec::load(dataset), seed);
}

// --------------------------------------------------------------- verify

struct VerifyConfig {
  ModelConfig config;
  std::int64_t s = 0;
};

VerifyConfig random_verify_config(int p, std::mt19937_64& rng) {
  std::vector<std::int64_t> heads;
  for (std::int64_t n : {2, 4}) {
    if (n % p == 0) heads.push_back(n);
  }
  if (heads.empty()) throw std::invalid_argument("verify supports p in {1, 2, 4}");
  auto pick = [&](std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  VerifyConfig v;
  v.config.n = heads[rng() % heads.size()];
  v.config.h = v.config.n * pick(1, 32 / v.config.n);
  v.config.L = 1;
  v.config.b = pick(1, 2);
  v.s = p * pick(1, 64 / p);
  return v;
}

struct LayerRun {
  SimTensor out;
  std::vector<CommStep> log;
};

/// Runs `chain` (one strategy per layer) on unified-layout shards.
LayerRun run_chain(std::span<const Strategy> chain, const SimTensor& x,
                   std::span<const DenseWeights> dense, const ModelConfig& cfg,
                   std::int64_t s, int p) {
  DeviceGrid grid(p, std::int64_t{1} << 40);
  Shards h = shard(x, spec_layout(Role::XMha, cfg, s, p), grid);
  for (std::size_t l = 0; l < chain.size(); ++l) {
    const auto w = LayerWeights::from_dense(dense[l], cfg, grid);
    h = ffn(chain[l], grid, mha(chain[l], grid, h, w, cfg), w, cfg);
    check_conformance(h, spec_layout(Role::Z, cfg, s, p));
  }
  LayerRun r;
  r.out = unshard(h, spec_layout(Role::Z, cfg, s, p));
  for (const auto& rec : grid.comm_log()) r.log.push_back({rec.primitive, rec.bytes});
  return r;
}

std::string cmd_verify(const std::vector<int>& ps, std::uint64_t seed, int configs,
                       bool& pass) {
  constexpr double kTol = 1e-9;
  ojson report;
  report["seed"] = seed;
  report["tolerance"] = kTol;
  ojson checks = ojson::array();
  pass = true;
  for (int p : ps) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(p));
    std::vector<VerifyConfig> cases;
    for (int i = 0; i < configs; ++i) cases.push_back(random_verify_config(p, rng));

    for (Strategy st : kAllStrategies) {
      double worst = 0.0;
      bool comm_ok = true;
      for (const auto& c : cases) {
        const auto dense = DenseWeights::random(c.config, rng);
        const auto x = random_tensor({c.config.b, c.s, c.config.h}, rng);
        const Strategy chain[] = {st};
        const auto run = run_chain(chain, x, {&dense, 1}, c.config, c.s, p);
        const auto ref = reference_ffn(reference_mha(x, dense, c.config.n), dense);
        worst = std::max(worst, relative_error(run.out, ref));
        auto expected = comm_schedule(st, OpKind::MHA, c.config, c.s, p, 2);
        const auto f = comm_schedule(st, OpKind::FFN, c.config, c.s, p, 2);
        expected.insert(expected.end(), f.begin(), f.end());
        comm_ok = comm_ok && run.log == expected;
      }
      const bool ok = worst <= kTol && comm_ok;
      pass = pass && ok;
      ojson row;
      row["suite"] = "equivalence";
      row["p"] = p;
      row["strategy"] = strategy_name(st);
      row["configs"] = configs;
      row["max_rel_error"] = worst;
      row["comm_matches_schedule"] = comm_ok;
      row["pass"] = ok;
      checks.push_back(row);
    }

    // Every ordered pair chained layer to layer, with the combined comm log
    // equal to the two strategies' own schedules (no redistribution).
    int pairs = 0;
    int layout_ok = 0;
    int chain_ok = 0;
    double worst = 0.0;
    const auto& c = cases.front();
    std::vector<DenseWeights> dense;
    for (int l = 0; l < 2; ++l) dense.push_back(DenseWeights::random(c.config, rng));
    const auto x = random_tensor({c.config.b, c.s, c.config.h}, rng);
    const auto ref = reference_ffn(
        reference_mha(reference_ffn(reference_mha(x, dense[0], c.config.n), dense[0]), dense[1],
                      c.config.n),
        dense[1]);
    for (Strategy a : kAllStrategies) {
      for (Strategy b : kAllStrategies) {
        ++pairs;
        if (compatible(spec_layout(Role::Z, c.config, c.s, p),
                       spec_layout(Role::XMha, c.config, c.s, p)) &&
            compatible(spec_layout(Role::O, c.config, c.s, p),
                       spec_layout(Role::XFfn, c.config, c.s, p))) {
          ++layout_ok;
        }
        const Strategy chain[] = {a, b};
        const auto run = run_chain(chain, x, dense, c.config, c.s, p);
        std::vector<CommStep> expected;
        for (Strategy st : chain) {
          for (OpKind op : {OpKind::MHA, OpKind::FFN}) {
            const auto steps = comm_schedule(st, op, c.config, c.s, p, 2);
            expected.insert(expected.end(), steps.begin(), steps.end());
          }
        }
        const double err = relative_error(run.out, ref);
        worst = std::max(worst, err);
        if (err <= kTol && run.log == expected) ++chain_ok;
      }
    }
    const bool ok = layout_ok == pairs && chain_ok == pairs;
    pass = pass && ok;
    ojson row;
    row["suite"] = "closure";
    row["p"] = p;
    row["pairs"] = pairs;
    row["layout_compatible"] = layout_ok;
    row["chained_without_redistribution"] = chain_ok;
    row["max_rel_error"] = worst;
    row["pass"] = ok;
    checks.push_back(row);
  }
  report["checks"] = checks;
  report["pass"] = pass;
  return report.dump(2) + "\n";
}

// --------------------------------------------------------------- report

TrainingTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open trace");
  TrainingTrace trace;
  std::string line;
  std::int64_t lineno = 0;
  bool csv = false;
  std::vector<std::string> header;
  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    SequenceRecord r;
    if (lineno == 1 && line.rfind("index,", 0) == 0) {
      csv = true;
      std::stringstream ss(line);
      std::string col;
      while (std::getline(ss, col, ',')) header.push_back(col);
      continue;
    }
    if (csv) {
      std::map<std::string, std::string> row;
      std::stringstream ss(line);
      std::string cell;
      std::size_t i = 0;
      while (std::getline(ss, cell, ',')) {
        if (i >= header.size()) fail("too many columns");
        row[header[i++]] = cell;
      }
      if (i != header.size()) fail("expected " + std::to_string(header.size()) + " columns");
      try {
        r.index = std::stoll(row.at("index"));
        r.s = std::stoll(row.at("s"));
        r.predicted_time_s = std::stod(row.at("predicted_time_s"));
        r.time_s = std::stod(row.at("time_s"));
        r.peak_mem_bytes = std::stod(row.at("peak_mem_bytes"));
        r.intra_switches = std::stoll(row.at("intra_switches"));
        r.inter_switches = std::stoll(row.at("inter_switches"));
        r.switched = row.at("switched") == "1";
        r.oom = row.at("oom") == "1";
      } catch (const std::exception& e) {
        fail(std::string("malformed row: ") + e.what());
      }
    } else {
      try {
        const auto j = nlohmann::json::parse(line);
        r.index = j.at("index").get<std::int64_t>();
        r.s = j.at("s").get<std::int64_t>();
        r.predicted_time_s = j.at("predicted_time_s").get<double>();
        r.time_s = j.at("time_s").get<double>();
        r.peak_mem_bytes = j.at("peak_mem_bytes").get<double>();
        r.intra_switches = j.at("intra_switches").get<std::int64_t>();
        r.inter_switches = j.at("inter_switches").get<std::int64_t>();
        r.switched = j.at("switched").get<bool>();
        r.oom = j.at("oom").get<bool>();
      } catch (const std::exception& e) {
        fail(e.what());
      }
    }
    trace.records.push_back(r);
    if (r.oom) continue;
    trace.cumulative_time_s += r.time_s;
    trace.max_supported_length = std::max(trace.max_supported_length, r.s);
    trace.switch_events += r.intra_switches + r.inter_switches;
    if (r.inter_switches > 0) ++trace.plan_changes;
  }
  return trace;
}

ojson rows_json(std::span<const AblationRow> rows) { return ojson::parse(ablation_json(rows)); }

std::string cmd_report(const TrainingTrace& trace, const std::vector<AblationRow>* ablation) {
  ojson doc;
  doc["sequences"] = trace.records.size();
  doc["max_supported_length"] = trace.max_supported_length;
  doc["cumulative_time_s"] = trace.cumulative_time_s;
  doc["oom"] = !trace.records.empty() && trace.records.back().oom;
  ojson table = ojson::array();
  std::int64_t limit = kTokensPerK;
  while (true) {
    std::int64_t count = 0;
    for (const auto& r : trace.records) {
      if (!r.oom && r.s <= limit) ++count;
    }
    ojson row;
    row["length_k"] = limit / kTokensPerK;
    row["sequences"] = count;
    row["time_s"] = trace.time_to_length(limit);
    table.push_back(row);
    if (limit >= trace.max_supported_length) break;
    limit *= 2;
  }
  doc["cumulative_time"] = table;
  doc["switch_overhead"] = ojson::parse(switch_overhead_report(trace).to_json());
  if (ablation) doc["ablation"] = rows_json(*ablation);
  return doc.dump(2) + "\n";
}

std::string simulate_summary(const TrainingTrace& trace, const ModelConfig& config,
                             const GridParams& grid, SimMode mode) {
  ojson doc;
  doc["h"] = config.h;
  doc["n"] = config.n;
  doc["L"] = config.L;
  doc["b"] = config.b;
  doc["p"] = grid.p;
  doc["capacity_bytes"] = grid.capacity_bytes;
  doc["mode"] = mode_name(mode);
  doc["sequences"] = trace.records.size();
  doc["max_supported_length"] = trace.max_supported_length;
  doc["cumulative_time_s"] = trace.cumulative_time_s;
  doc["switch_events"] = trace.switch_events;
  doc["plan_changes"] = trace.plan_changes;
  doc["redistribution_ops"] = trace.redistribution_ops;
  doc["oom"] = !trace.records.empty() && trace.records.back().oom;
  return doc.dump(2) + "\n";
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(),
                                                suffix) == 0;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layer-wise parallel strategy planning and hot-switching simulation"};
  app.name("hotswitch");
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);

  ModelOptions mo;
  std::string out_path;
  std::uint64_t seed = 42;
  double gamma = 0.05;

  auto* profile = app.add_subcommand("profile", "Write analytic profiles over a length sweep (CSV)");
  std::string lengths;
  add_model_options(profile, mo);
  profile->add_option("--lengths", lengths, "Comma-separated sequence lengths (default sweep)");
  profile->add_option("--out", out_path, "Output CSV path (default stdout)");

  auto* fit = app.add_subcommand("fit", "Fit hybrid cost models on profiles (JSON bundle)");
  std::vector<std::string> profile_paths;
  add_model_options(fit, mo);
  fit->add_option("--profiles", profile_paths, "Profile CSV files")->required();
  fit->add_option("--seed", seed, "Forest seed")->capture_default_str();
  fit->add_option("--out", out_path, "Output bundle path (default stdout)");

  auto* plan = app.add_subcommand("plan", "Select a per-layer strategy plan (JSON)");
  std::int64_t s = 0;
  std::string bundle_path;
  add_model_options(plan, mo);
  plan->add_option("--s", s, "Sequence length")->required()->check(CLI::PositiveNumber);
  plan->add_option("--bundle", bundle_path, "Fitted bundle (default: profile and fit now)");
  plan->add_option("--seed", seed, "Forest seed when fitting")->capture_default_str();
  plan->add_option("--out", out_path, "Output path (default stdout)");

  auto* simulate = app.add_subcommand("simulate", "Simulate training over a dataset (trace)");
  std::string dataset = "grch38";
  std::int64_t samples = 1000;
  std::string mode_text = "analytic";
  double headroom = SimOptions{}.memory_headroom;
  bool no_smoothing = false;
  add_model_options(simulate, mo);
  simulate->add_option("--dataset", dataset, "Preset (githubcode, grch38) or dataset JSON path")
      ->capture_default_str();
  simulate->add_option("--samples", samples, "Samples drawn from a histogram dataset")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Sampling and forest seed")->capture_default_str();
  simulate->add_option("--gamma", gamma, "Smoothing ratio")->capture_default_str();
  simulate->add_option("--mode", mode_text, "analytic or numeric")->capture_default_str();
  simulate->add_option("--bundle", bundle_path, "Fitted bundle (default: profile and fit now)");
  simulate->add_option("--headroom", headroom, "Capacity fraction reserved for model error")
      ->capture_default_str();
  simulate->add_flag("--no-smoothing", no_smoothing, "Disable plan smoothing");
  simulate->add_option("--out", out_path,
                       "Trace path, CSV if it ends in .csv, else JSON lines (default stdout)");

  auto* verify = app.add_subcommand("verify", "Run strategy equivalence and layout closure checks");
  std::vector<int> verify_ps{1, 2, 4};
  int verify_configs = 20;
  verify->add_option("--p", verify_ps, "Grid sizes to check")->capture_default_str();
  verify->add_option("--seed", seed, "Random seed")->capture_default_str();
  verify->add_option("--configs", verify_configs, "Random configs per grid size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify->add_option("--out", out_path, "Report path (default stdout)");

  auto* report = app.add_subcommand("report", "Summarize a trace, optionally with ablations");
  std::string trace_path;
  bool ablate = false;
  add_model_options(report, mo);
  report->add_option("--trace", trace_path, "Trace file from simulate")->required();
  report->add_flag("--ablate", ablate, "Also rerun the simulation with components removed");
  report->add_option("--dataset", dataset, "Dataset for --ablate")->capture_default_str();
  report->add_option("--samples", samples, "Samples for --ablate")->capture_default_str();
  report->add_option("--seed", seed, "Seed for --ablate")->capture_default_str();
  report->add_option("--gamma", gamma, "Smoothing ratio for --ablate")->capture_default_str();
  report->add_option("--bundle", bundle_path, "Fitted bundle for --ablate");
  report->add_option("--out", out_path, "Report path (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*profile) {
      const auto config = require_config(mo);
      const auto grid = resolve_grid(mo);
      const auto sweep = lengths.empty() ? default_profile_lengths() : parse_lengths(lengths);
      const auto records =
          profile_sweep(config, resolve_strategies(mo.strategies), config.b, sweep, grid);
      std::ostringstream csv;
      write_profiles(csv, records);
      emit(out_path, csv.str(), out);
    } else if (*fit) {
      std::vector<ProfileRecord> records;
      for (const auto& path : profile_paths) {
        auto r = ingest_profiles(path);
        records.insert(records.end(), r.begin(), r.end());
      }
      if (records.empty()) throw std::invalid_argument("profiles contain no records");
      auto config = resolve_config(mo);
      if (!config) {
        config = records.front().config;
        for (const auto& r : records) {
          if (r.config.h != config->h || r.config.n != config->n || r.config.L != config->L) {
            throw std::invalid_argument(
                "profiles span several models; pass --model or -h/-n/-L");
          }
        }
      }
      if (!mo.strategies.empty()) {
        const auto keep = resolve_strategies(mo.strategies);
        std::erase_if(records, [&](const ProfileRecord& r) {
          return std::find(keep.begin(), keep.end(), r.strategy) == keep.end();
        });
      }
      ForestParams params;
      params.seed = seed;
      const auto grid = resolve_grid(mo);
      const auto bundle = CostModelBundle::fit(records, *config,
                                               static_cast<double>(grid.capacity_bytes), params);
      emit(out_path, with_newline(bundle.to_json()), out);
    } else if (*plan) {
      const auto grid = resolve_grid(mo);
      ModelConfig config;
      const auto bundle = obtain_bundle(bundle_path, mo, config, grid, seed);
      PlanCache cache;
      const auto p = select_plan(config.b, s, config, bundle, cache,
                                 static_cast<double>(grid.capacity_bytes));
      emit(out_path, with_newline(plan_to_json(p, config.b, s)), out);
    } else if (*simulate) {
      const auto mode = parse_mode(mode_text);
      if (!mode) throw std::invalid_argument("--mode must be analytic or numeric");
      const auto grid = resolve_grid(mo);
      ModelConfig config;
      const auto bundle = obtain_bundle(bundle_path, mo, config, grid, seed);
      const auto data = resolve_dataset(dataset, samples, seed);
      SimOptions opt;
      opt.mode = *mode;
      opt.gamma = gamma;
      opt.smoothing = !no_smoothing;
      opt.memory_headroom = headroom;
      opt.seed = seed;
      const auto trace = run_training_sim(data, config, grid, bundle, opt);
      const std::string text = ends_with(out_path, ".csv") ? trace.to_csv() : trace.to_jsonl();
      emit(out_path, text, out);
      if (!out_path.empty() && out_path != "-") {
        out << simulate_summary(trace, config, grid, *mode);
      }
    } else if (*verify) {
      bool pass = false;
      emit(out_path, cmd_verify(verify_ps, seed, verify_configs, pass), out);
      if (!pass) {
        err << "hotswitch: verify: some checks failed\n";
        return 1;
      }
    } else if (*report) {
      const auto trace = read_trace(trace_path);
      std::vector<AblationRow> rows;
      if (ablate) {
        const auto grid = resolve_grid(mo);
        ModelConfig config;
        const auto bundle = obtain_bundle(bundle_path, mo, config, grid, seed);
        const auto data = resolve_dataset(dataset, samples, seed);
        SimOptions opt;
        opt.gamma = gamma;
        opt.seed = seed;
        rows = ablation_table(data, config, grid, bundle, opt);
      }
      emit(out_path, cmd_report(trace, ablate ? &rows : nullptr), out);
    }
  } catch (const std::exception& e) {
    err << "hotswitch: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace hotswitch::cli
