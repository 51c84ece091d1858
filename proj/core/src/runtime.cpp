// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/runtime.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <stdexcept>

namespace hotswitch {

namespace {

using ojson = nlohmann::ordered_json;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::string lower(std::string_view v) {
  std::string out(v);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Boundaries 0, 4K, 8K, ..., 128K, then unbounded. Masses are renormalized
// because published percentages are rounded (GRCh38 sums to 99.1%).
std::vector<LengthBucket> k_buckets(std::initializer_list<double> probs) {
  double total = 0.0;
  for (double p : probs) total += p;
  std::vector<LengthBucket> out;
  std::int64_t lo = 0, hi = 4 * kTokensPerK;
  for (double p : probs) {
    out.push_back({lo, hi, p / total});
    lo = hi;
    hi = out.size() + 1 == probs.size() ? kUnbounded : hi * 2;
  }
  return out;
}

}  // namespace

// -------------------------------------------------------------- datasets

DatasetSpec DatasetSpec::explicit_lengths(std::vector<std::int64_t> lengths) {
  DatasetSpec d;
  d.name = "explicit";
  d.lengths = std::move(lengths);
  return d;
}

DatasetSpec DatasetSpec::github_code(std::int64_t samples) {
  DatasetSpec d;
  d.name = "GitHubCode";
  d.buckets = k_buckets({0.657, 0.145, 0.098, 0.051, 0.027, 0.011, 0.011});
  d.max_length = 309 * kTokensPerK;
  d.samples = samples;
  return d;
}

DatasetSpec DatasetSpec::grch38(std::int64_t samples) {
  DatasetSpec d;
  d.name = "GRCh38";
  d.buckets = k_buckets({0.035, 0.264, 0.287, 0.212, 0.119, 0.055, 0.019});
  d.max_length = 624 * kTokensPerK;
  d.samples = samples;
  return d;
}

std::optional<DatasetSpec> DatasetSpec::preset(std::string_view name, std::int64_t samples) {
  const auto n = lower(name);
  if (n == "githubcode") return github_code(samples);
  if (n == "grch38") return grch38(samples);
  return std::nullopt;
}

void DatasetSpec::validate() const {
  if (!lengths.empty()) {
    for (auto s : lengths) {
      if (s < 1) throw std::invalid_argument("dataset lengths must be >= 1");
    }
    return;
  }
  if (buckets.empty()) throw std::invalid_argument("dataset needs lengths or buckets");
  if (samples < 0) throw std::invalid_argument("dataset sample count must be >= 0");
  if (granularity < 1) throw std::invalid_argument("dataset granularity must be >= 1");
  if (max_length < granularity) throw std::invalid_argument("dataset max below granularity");
  double total = 0.0;
  for (const auto& b : buckets) {
    if (b.probability < 0) throw std::invalid_argument("negative bucket probability");
    if (b.lo < 0 || b.hi <= b.lo) throw std::invalid_argument("empty or inverted bucket");
    if (b.hi != kUnbounded && b.hi - 1 > max_length) {
      throw std::invalid_argument("bucket bound " + std::to_string(b.hi) +
                                  " exceeds dataset max " + std::to_string(max_length));
    }
    if (b.probability > 0 && std::max(b.lo, granularity) > max_length) {
      throw std::invalid_argument("bucket starting at " + std::to_string(b.lo) +
                                  " lies above the dataset max");
    }
    total += b.probability;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("bucket probabilities sum to " + std::to_string(total));
  }
}

DatasetSpec DatasetSpec::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  DatasetSpec d;
  d.name = j.value("name", std::string("custom"));
  if (j.contains("lengths")) {
    d.lengths = j.at("lengths").get<std::vector<std::int64_t>>();
  } else {
    for (const auto& b : j.at("buckets")) {
      LengthBucket lb;
      lb.lo = b.at(0).get<std::int64_t>();
      lb.hi = b.at(1).is_null() ? kUnbounded : b.at(1).get<std::int64_t>();
      lb.probability = b.at(2).get<double>();
      d.buckets.push_back(lb);
    }
    d.max_length = j.at("max").get<std::int64_t>();
    d.samples = j.at("samples").get<std::int64_t>();
    d.granularity = j.value("granularity", std::int64_t{64});
  }
  d.validate();
  return d;
}

DatasetSpec DatasetSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open dataset spec");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::vector<std::int64_t> load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (!spec.lengths.empty()) return spec.lengths;
  std::mt19937_64 rng(seed);
  const auto g = spec.granularity;
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(spec.samples));
  for (std::int64_t i = 0; i < spec.samples; ++i) {
    const double u = uniform01(rng);
    double acc = 0.0;
    const LengthBucket* bucket = &spec.buckets.back();
    for (const auto& b : spec.buckets) {
      acc += b.probability;
      if (u < acc && b.probability > 0) {
        bucket = &b;
        break;
      }
    }
    // Multiples of g inside [lo, min(hi - 1, max)], never below g.
    const std::int64_t top = bucket->hi == kUnbounded ? spec.max_length
                                                      : std::min(bucket->hi - 1, spec.max_length);
    const std::int64_t k_lo = std::max<std::int64_t>(1, (bucket->lo + g - 1) / g);
    const std::int64_t k_hi = std::max(k_lo, top / g);
    const auto span = static_cast<std::uint64_t>(k_hi - k_lo + 1);
    out.push_back((k_lo + static_cast<std::int64_t>(rng() % span)) * g);
  }
  return out;
}

std::vector<std::int64_t> curriculum_sort(std::vector<std::int64_t> lengths) {
  std::stable_sort(lengths.begin(), lengths.end());
  return lengths;
}

std::string_view mode_name(SimMode m) { return m == SimMode::Analytic ? "analytic" : "numeric"; }

std::optional<SimMode> parse_mode(std::string_view name) {
  if (name == "analytic") return SimMode::Analytic;
  if (name == "numeric") return SimMode::Numeric;
  return std::nullopt;
}

// ---------------------------------------------------------------- traces

std::string plan_summary(std::span<const Strategy> layers) {
  std::string out;
  std::size_t i = 0;
  while (i < layers.size()) {
    std::size_t j = i;
    while (j < layers.size() && layers[j] == layers[i]) ++j;
    if (!out.empty()) out += ';';
    out += std::string(strategy_name(layers[i])) + "*" + std::to_string(j - i);
    i = j;
  }
  return out;
}

double TrainingTrace::time_to_length(std::int64_t limit) const {
  double t = 0.0;
  for (const auto& r : records) {
    if (!r.oom && r.s <= limit) t += r.time_s;
  }
  return t;
}

std::string TrainingTrace::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    ojson j;
    j["index"] = r.index;
    j["s"] = r.s;
    j["plan"] = plan_summary(r.plan.per_layer);
    j["predicted_time_s"] = r.predicted_time_s;
    j["time_s"] = r.time_s;
    j["peak_mem_bytes"] = r.peak_mem_bytes;
    j["intra_switches"] = r.intra_switches;
    j["inter_switches"] = r.inter_switches;
    j["switched"] = r.switched;
    j["oom"] = r.oom;
    out += j.dump() + "\n";
  }
  return out;
}

std::string TrainingTrace::to_csv() const {
  std::string out =
      "index,s,plan,predicted_time_s,time_s,cumulative_time_s,peak_mem_bytes,intra_switches,"
      "inter_switches,switched,oom\n";
  double cumulative = 0.0;
  char buf[512];
  for (const auto& r : records) {
    if (!r.oom) cumulative += r.time_s;
    std::snprintf(buf, sizeof buf, "%lld,%lld,%s,%.17g,%.17g,%.17g,%.17g,%lld,%lld,%d,%d\n",
                  static_cast<long long>(r.index), static_cast<long long>(r.s),
                  plan_summary(r.plan.per_layer).c_str(), r.predicted_time_s, r.time_s,
                  cumulative, r.peak_mem_bytes, static_cast<long long>(r.intra_switches),
                  static_cast<long long>(r.inter_switches), r.switched ? 1 : 0, r.oom ? 1 : 0);
    out += buf;
  }
  return out;
}

// ------------------------------------------------------------ simulation

namespace {

struct Measured {
  double time_s = 0.0;
  double peak_bytes = 0.0;
  std::int64_t redistribution_ops = 0;
};

// Executes one forward pass of `plan` on a fresh simulated grid, with
// pre-LN residual blocks around each sublayer.
class NumericRunner {
 public:
  NumericRunner(const ModelConfig& cfg, const GridParams& gp, const SimOptions& opt)
      : cfg_(cfg), gp_(gp), seed_(opt.seed), max_elements_(opt.numeric_max_elements) {
    std::mt19937_64 rng(seed_);
    for (std::int64_t l = 0; l < cfg_.L; ++l) dense_.push_back(DenseWeights::random(cfg_, rng));
  }

  Measured run(std::span<const Strategy> plan, std::int64_t s, std::int64_t index) const {
    const auto elements = cfg_.b * s * cfg_.h * cfg_.L;
    if (elements > max_elements_) {
      throw std::invalid_argument("numeric mode bound exceeded: b*s*h*L = " +
                                  std::to_string(elements));
    }
    DeviceGrid grid(gp_.p, gp_.capacity_bytes, gp_.bytes_per_elem);
    std::vector<LayerWeights> weights;
    std::vector<MemoryLease> param_mem;
    for (const auto& d : dense_) {
      weights.push_back(LayerWeights::from_dense(d, cfg_, grid));
      for (int dev = 0; dev < grid.size(); ++dev) {
        param_mem.push_back(grid.lease(dev, weights.back().elements_per_device(),
                                       MemKind::Parameter));
      }
    }
    std::mt19937_64 rng(seed_ + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(index + 1));
    const auto x_dense = random_tensor({cfg_.b, s, cfg_.h}, rng);
    Shards x = shard(x_dense, spec_layout(Role::XMha, cfg_, s, gp_.p), grid);
    const auto shard_elems = x.front().numel();
    std::vector<MemoryLease> x_mem;
    for (int dev = 0; dev < grid.size(); ++dev) x_mem.push_back(grid.lease(dev, shard_elems));

    const auto& registry = FunctionRegistry::builtin();
    std::vector<CommStep> expected;
    for (std::size_t l = 0; l < plan.size(); ++l) {
      for (OpKind op : {OpKind::MHA, OpKind::FFN}) {
        Shards normed;
        std::vector<MemoryLease> normed_mem;
        for (int dev = 0; dev < grid.size(); ++dev) {
          normed.push_back(layer_norm(x[static_cast<std::size_t>(dev)]));
          normed.back().device = dev;
          normed_mem.push_back(grid.lease(dev, shard_elems));
        }
        const Shards y = registry.lookup(plan[l], op)(grid, normed, weights[l], cfg_);
        for (int dev = 0; dev < grid.size(); ++dev) {
          add_inplace(x[static_cast<std::size_t>(dev)], y[static_cast<std::size_t>(dev)]);
        }
        const auto steps = comm_schedule(plan[l], op, cfg_, s, gp_.p, gp_.bytes_per_elem);
        expected.insert(expected.end(), steps.begin(), steps.end());
      }
    }

    Measured m;
    const auto& log = grid.comm_log();
    const std::size_t common = std::min(log.size(), expected.size());
    for (std::size_t i = 0; i < common; ++i) {
      if (log[i].primitive != expected[i].primitive || log[i].bytes != expected[i].bytes) {
        ++m.redistribution_ops;
      }
    }
    m.redistribution_ops += static_cast<std::int64_t>(std::max(log.size(), expected.size()) -
                                                      common);
    m.time_s = static_cast<double>(cfg_.L) * 3.0 * layer_forward_flops(cfg_, cfg_.b, s) /
               (gp_.flops_per_s * gp_.p);
    for (const auto& r : log) {
      m.time_s += gp_.alpha_s + static_cast<double>(r.bytes) / gp_.bytes_per_s_link;
    }
    m.peak_bytes = static_cast<double>(grid.max_peak_bytes());
    return m;
  }

 private:
  ModelConfig cfg_;
  GridParams gp_;
  std::uint64_t seed_;
  std::int64_t max_elements_;
  std::vector<DenseWeights> dense_;
};

}  // namespace

TrainingTrace run_training_sim(std::span<const std::int64_t> lengths, const ModelConfig& config,
                               const GridParams& grid, const CostProvider& models,
                               const SimOptions& options) {
  config.validate();
  const auto order = curriculum_sort(std::vector<std::int64_t>(lengths.begin(), lengths.end()));
  const double switch_bytes =
      options.switch_overhead_bytes.value_or(static_cast<double>(grid.bytes_per_elem) * 12.0 *
                                             static_cast<double>(config.h * config.h) / grid.p);
  if (!(options.memory_headroom >= 0.0 && options.memory_headroom < 1.0)) {
    throw std::invalid_argument("memory headroom must be in [0, 1)");
  }
  // Plans are chosen below capacity by the switching transient and a margin
  // for cost-model error.
  const double selection_capacity =
      static_cast<double>(grid.capacity_bytes) * (1.0 - options.memory_headroom) - switch_bytes;
  std::optional<NumericRunner> numeric;
  if (options.mode == SimMode::Numeric) numeric.emplace(config, grid, options);

  TrainingTrace trace;
  PlanCache cache;
  std::optional<StrategyPlan> prev;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::int64_t s = order[i];
    SelectOptions sel;
    sel.gamma = options.gamma;
    sel.prev_plan = options.smoothing && prev ? &*prev : nullptr;
    const StrategyPlan plan =
        select_plan(config.b, s, config, models, cache, selection_capacity, sel);

    SequenceRecord r;
    r.index = static_cast<std::int64_t>(i);
    r.s = s;
    r.plan = plan;
    r.predicted_time_s = plan.predicted_time_s;
    for (std::size_t l = 1; l < plan.per_layer.size(); ++l) {
      if (plan.per_layer[l] != plan.per_layer[l - 1]) ++r.intra_switches;
    }
    if (prev) {
      for (std::size_t l = 0; l < plan.per_layer.size(); ++l) {
        if (plan.per_layer[l] != prev->per_layer[l]) ++r.inter_switches;
      }
    }
    r.switched = r.intra_switches + r.inter_switches > 0;

    if (numeric) {
      const auto m = numeric->run(plan.per_layer, s, r.index);
      r.time_s = m.time_s;
      r.peak_mem_bytes = m.peak_bytes;
      trace.redistribution_ops += m.redistribution_ops;
    } else {
      const auto truth = analytic_plan_cost(plan.per_layer, config, config.b, s, grid);
      r.time_s = truth.time_s;
      r.peak_mem_bytes = truth.mem_bytes;
    }
    if (r.switched) r.peak_mem_bytes += switch_bytes;
    r.oom = r.peak_mem_bytes > static_cast<double>(grid.capacity_bytes);
    trace.records.push_back(r);
    if (r.oom) break;

    trace.cumulative_time_s += r.time_s;
    trace.max_supported_length = std::max(trace.max_supported_length, s);
    trace.switch_events += r.intra_switches + r.inter_switches;
    if (prev && prev->per_layer != plan.per_layer) ++trace.plan_changes;
    prev = plan;
  }
  return trace;
}

// -------------------------------------------------------------- ablation

TrainingTrace ablation_run(std::span<const std::int64_t> lengths, const ModelConfig& config,
                           const GridParams& grid, const CostModelBundle& bundle,
                           const SimOptions& options, const AblationSpec& disable) {
  std::vector<Strategy> keep;
  for (Strategy s : bundle.strategies()) {
    if (!disable.drop_strategies.count(s)) keep.push_back(s);
  }
  if (keep.empty()) throw std::invalid_argument("ablation leaves no strategy enabled");
  CostModelBundle models = bundle.restricted(keep);
  models.set_poly_only(disable.drop_forest || bundle.poly_only());
  SimOptions opt = options;
  if (disable.drop_smoothing) opt.smoothing = false;
  return run_training_sim(lengths, config, grid, models, opt);
}

AblationRow compare_traces(std::string label, const TrainingTrace& full,
                           const TrainingTrace& ablated) {
  AblationRow row;
  row.label = std::move(label);
  row.seq_len = ablated.max_supported_length;
  const auto common = std::min(full.max_supported_length, ablated.max_supported_length);
  row.time_s = ablated.time_to_length(common);
  row.time_full_s = full.time_to_length(common);
  row.saving = row.time_s > 0 ? (row.time_s - row.time_full_s) / row.time_s : 0.0;
  return row;
}

std::vector<AblationRow> ablation_table(std::span<const std::int64_t> lengths,
                                        const ModelConfig& config, const GridParams& grid,
                                        const CostModelBundle& bundle,
                                        const SimOptions& options) {
  const auto full = ablation_run(lengths, config, grid, bundle, options, {});
  std::vector<AblationRow> rows{compare_traces("full", full, full)};
  const auto strategies = bundle.strategies();
  if (strategies.size() > 1) {
    for (Strategy s : strategies) {
      AblationSpec spec;
      spec.label = "w/o " + std::string(strategy_name(s));
      spec.drop_strategies = {s};
      rows.push_back(compare_traces(
          spec.label, full, ablation_run(lengths, config, grid, bundle, options, spec)));
    }
  }
  AblationSpec no_rf;
  no_rf.label = "w/o RF";
  no_rf.drop_forest = true;
  rows.push_back(compare_traces(no_rf.label, full,
                                ablation_run(lengths, config, grid, bundle, options, no_rf)));
  AblationSpec no_smooth;
  no_smooth.label = "w/o smoothing";
  no_smooth.drop_smoothing = true;
  rows.push_back(compare_traces(
      no_smooth.label, full, ablation_run(lengths, config, grid, bundle, options, no_smooth)));
  return rows;
}

std::string ablation_json(std::span<const AblationRow> rows) {
  ojson j = ojson::array();
  for (const auto& r : rows) {
    j.push_back({{"setting", r.label},
                 {"Seq_len", r.seq_len},
                 {"Time", r.time_s},
                 {"Time_full", r.time_full_s},
                 {"Saving", r.saving}});
  }
  return j.dump(2);
}

// ------------------------------------------------------ switch overhead

std::string SwitchOverheadReport::to_json() const {
  ojson j;
  j["switch_events"] = switch_events;
  j["restarts_avoided"] = restarts_avoided;
  j["cold_restart_s"] = cold_restart_s;
  j["reinit_share"] = reinit_share;
  j["hot_switch_s"] = hot_switch_s;
  j["cold_total_s"] = cold_total_s;
  j["savings_s"] = savings_s;
  return j.dump(2);
}

SwitchOverheadReport switch_overhead_report(const TrainingTrace& trace,
                                            const ColdRestartModel& cold) {
  SwitchOverheadReport r;
  r.switch_events = trace.switch_events;
  r.restarts_avoided = trace.plan_changes;
  r.cold_restart_s = cold.total_s();
  r.reinit_share = cold.reinit_share();
  r.hot_switch_s = 0.0;
  r.cold_total_s = static_cast<double>(r.restarts_avoided) * r.cold_restart_s;
  r.savings_s = r.cold_total_s - r.hot_switch_s;
  return r;
}

}  // namespace hotswitch
