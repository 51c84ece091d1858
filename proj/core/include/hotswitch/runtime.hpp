// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// Training-loop simulation over a dataset of sequence lengths: curriculum
// order, per-sequence plan selection, hot-switched execution and traces.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hotswitch/costmodel.hpp"
#include "hotswitch/selector.hpp"

namespace hotswitch {

inline constexpr std::int64_t kTokensPerK = 1024;
inline constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max();

/// Half-open length bucket [lo, hi) with its probability mass.
struct LengthBucket {
  std::int64_t lo = 0;
  std::int64_t hi = kUnbounded;
  double probability = 0.0;
};

struct DatasetSpec {
  std::string name;
  /// Explicit lengths; when non-empty the histogram fields are ignored.
  std::vector<std::int64_t> lengths;
  std::vector<LengthBucket> buckets;
  std::int64_t max_length = 0;
  std::int64_t samples = 0;
  /// Sampled lengths are positive multiples of this.
  std::int64_t granularity = 64;

  static DatasetSpec explicit_lengths(std::vector<std::int64_t> lengths);
  static DatasetSpec github_code(std::int64_t samples = 1000);
  static DatasetSpec grch38(std::int64_t samples = 1000);
  /// "githubcode" or "grch38" (case-insensitive); nullopt otherwise.
  static std::optional<DatasetSpec> preset(std::string_view name, std::int64_t samples = 1000);

  /// Throws std::invalid_argument for inconsistent histograms.
  void validate() const;

  /// {"lengths": [...]} or {"buckets": [[lo, hi|null, p], ...], "max": ...,
  ///  "samples": ..., "granularity": ...}
  static DatasetSpec from_json(std::string_view text);
  static DatasetSpec load(const std::string& path);
};

std::vector<std::int64_t> load_dataset(const DatasetSpec& spec, std::uint64_t seed);
std::vector<std::int64_t> curriculum_sort(std::vector<std::int64_t> lengths);

enum class SimMode { Analytic, Numeric };
std::string_view mode_name(SimMode m);
std::optional<SimMode> parse_mode(std::string_view name);

struct SimOptions {
  SimMode mode = SimMode::Analytic;
  double gamma = 0.05;
  bool smoothing = true;
  /// Transient bytes charged to a sequence that switches strategy anywhere;
  /// defaults to one layer's parameter bytes per device.
  std::optional<double> switch_overhead_bytes;
  /// Fraction of capacity held back from selection for prediction error.
  double memory_headroom = 0.03;
  std::uint64_t seed = 42;
  /// Numeric mode bound on b * s * h * L.
  std::int64_t numeric_max_elements = std::int64_t{1} << 22;
};

struct SequenceRecord {
  std::int64_t index = 0;
  std::int64_t s = 0;
  StrategyPlan plan;
  double predicted_time_s = 0.0;
  double time_s = 0.0;
  double peak_mem_bytes = 0.0;
  std::int64_t intra_switches = 0;  // layer boundaries with a strategy change
  std::int64_t inter_switches = 0;  // layers that changed since the previous sequence
  bool switched = false;
  bool oom = false;
};

struct TrainingTrace {
  std::vector<SequenceRecord> records;
  double cumulative_time_s = 0.0;
  std::int64_t max_supported_length = 0;
  std::int64_t redistribution_ops = 0;
  std::int64_t switch_events = 0;
  /// Sequences whose plan differs from the previous sequence's plan.
  std::int64_t plan_changes = 0;

  /// Cumulative time of completed sequences with s <= limit.
  double time_to_length(std::int64_t limit) const;

  std::string to_jsonl() const;
  std::string to_csv() const;
};

/// Compact plan text, e.g. "MegatronTS*90;METP*6".
std::string plan_summary(std::span<const Strategy> layers);

/// Runs `lengths` in curriculum order. Plans come from `models`; ground truth
/// is the analytic generator (analytic mode) or execution on a simulated
/// grid (numeric mode). The trace stops at the first OOM.
TrainingTrace run_training_sim(std::span<const std::int64_t> lengths, const ModelConfig& config,
                               const GridParams& grid, const CostProvider& models,
                               const SimOptions& options = {});

// ------------------------------------------------------------- ablation

struct AblationSpec {
  std::string label;
  std::set<Strategy> drop_strategies;
  bool drop_forest = false;
  bool drop_smoothing = false;
};

struct AblationRow {
  std::string label;
  std::int64_t seq_len = 0;  // max supported length of the ablated run
  double time_s = 0.0;       // ablated time to the common length
  double time_full_s = 0.0;  // full-system time to the common length
  double saving = 0.0;       // (time - time_full) / time
};

/// Reruns the simulation with components removed.
TrainingTrace ablation_run(std::span<const std::int64_t> lengths, const ModelConfig& config,
                           const GridParams& grid, const CostModelBundle& bundle,
                           const SimOptions& options, const AblationSpec& disable);

AblationRow compare_traces(std::string label, const TrainingTrace& full,
                           const TrainingTrace& ablated);

/// Full system, one row per dropped strategy, without RF, without smoothing.
std::vector<AblationRow> ablation_table(std::span<const std::int64_t> lengths,
                                        const ModelConfig& config, const GridParams& grid,
                                        const CostModelBundle& bundle, const SimOptions& options);

std::string ablation_json(std::span<const AblationRow> rows);

// ----------------------------------------------------- switch overhead

struct ColdRestartModel {
  double import_s = 2.5;
  double data_reload_s = 5.0;
  double model_reinit_s = 22.0;
  double optimizer_s = 1.0;
  /// Remainder so reinit is 70.2% of the measured total.
  double unattributed_s = 22.0 / 0.702 - 30.5;

  double total_s() const {
    return import_s + data_reload_s + model_reinit_s + optimizer_s + unattributed_s;
  }
  double reinit_share() const { return model_reinit_s / total_s(); }
};

struct SwitchOverheadReport {
  std::int64_t switch_events = 0;
  std::int64_t restarts_avoided = 0;
  double cold_restart_s = 0.0;
  double reinit_share = 0.0;
  double hot_switch_s = 0.0;
  double cold_total_s = 0.0;
  double savings_s = 0.0;

  std::string to_json() const;
};

SwitchOverheadReport switch_overhead_report(const TrainingTrace& trace,
                                            const ColdRestartModel& cold = {});

}  // namespace hotswitch
