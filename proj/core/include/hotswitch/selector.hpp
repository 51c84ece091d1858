// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// Layer-wise strategy selection: minimize summed per-layer time subject to
// summed per-layer memory staying strictly below capacity.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "hotswitch/costmodel.hpp"
#include "hotswitch/strategies.hpp"

namespace hotswitch {

struct StrategyPlan {
  std::vector<Strategy> per_layer;
  double predicted_time_s = 0.0;
  double predicted_mem_bytes = 0.0;

  friend bool operator==(const StrategyPlan&, const StrategyPlan&) = default;
};

/// {"b":..., "s":..., "layers":[names], "time_s":..., "mem_bytes":...}
std::string plan_to_json(const StrategyPlan& plan, std::int64_t b, std::int64_t s);

struct StrategyCost {
  Strategy strategy;
  LayerCost cost;
};
using SortedStrategyList = std::vector<StrategyCost>;
using CostTable = std::map<Strategy, LayerCost>;

/// Drops every strategy another one matches or beats in both time and memory
/// (strictly better in one), then sorts by time, memory, strategy order.
/// Throws std::invalid_argument on empty input.
SortedStrategyList pop_useless(std::span<const StrategyCost> candidates);

/// Model-call counters.
struct SelectionCounters {
  std::int64_t predictions = 0;        // per-strategy cost model queries
  std::int64_t layer_evaluations = 0;  // per-layer terms accumulated in plan checks
  std::int64_t cache_hits = 0;
  std::int64_t smoothing_retained = 0;
};

/// Plans keyed by (b, s) and the cost-model version that produced them.
class PlanCache {
 public:
  struct Entry {
    StrategyPlan plan;
    CostTable costs;
  };

  const Entry* find(std::int64_t b, std::int64_t s, std::uint64_t version) const;
  void store(std::int64_t b, std::int64_t s, std::uint64_t version, Entry entry);
  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::map<std::tuple<std::int64_t, std::int64_t, std::uint64_t>, Entry> entries_;
};

/// Sum of per-layer memory strictly below capacity. Accumulation stops at
/// the first prefix that reaches capacity.
bool plan_feasible(std::span<const Strategy> plan, const CostTable& costs, double capacity_bytes,
                   SelectionCounters* counters = nullptr);
double plan_time(std::span<const Strategy> plan, const CostTable& costs,
                 SelectionCounters* counters = nullptr);
double plan_mem(std::span<const Strategy> plan, const CostTable& costs);

bool plan_feasible(std::span<const Strategy> plan, const CostProvider& models, std::int64_t b,
                   std::int64_t s, double capacity_bytes);
double plan_time(std::span<const Strategy> plan, const CostProvider& models, std::int64_t b,
                 std::int64_t s);

struct SelectOptions {
  double gamma = 0.05;
  const StrategyPlan* prev_plan = nullptr;
  SelectionCounters* counters = nullptr;
};

/// Heuristic selection over uniform plans and prefix mixes of the
/// time-sorted, Pareto-pruned strategy list. Falls back to the least-memory
/// strategy on every layer when no candidate fits.
StrategyPlan select_plan(std::int64_t b, std::int64_t s, const ModelConfig& config,
                         const CostProvider& models, PlanCache& cache, double capacity_bytes,
                         const SelectOptions& options = {});

inline constexpr std::int64_t kBruteForceLimit = std::int64_t{1} << 20;

/// Exhaustive argmin of plan time over all |P|^L assignments that fit.
/// Throws std::invalid_argument when |P|^L exceeds kBruteForceLimit.
std::optional<StrategyPlan> brute_force_plan(std::int64_t b, std::int64_t s,
                                             const ModelConfig& config,
                                             const CostProvider& models, double capacity_bytes);

}  // namespace hotswitch
