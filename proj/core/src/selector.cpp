// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/selector.hpp"

#include <algorithm>
#include <deque>
#include <json.hpp>
#include <stdexcept>

namespace hotswitch {

std::string plan_to_json(const StrategyPlan& plan, std::int64_t b, std::int64_t s) {
  nlohmann::ordered_json j;
  j["b"] = b;
  j["s"] = s;
  j["layers"] = nlohmann::ordered_json::array();
  for (Strategy st : plan.per_layer) j["layers"].push_back(std::string(strategy_name(st)));
  j["time_s"] = plan.predicted_time_s;
  j["mem_bytes"] = plan.predicted_mem_bytes;
  return j.dump();
}

SortedStrategyList pop_useless(std::span<const StrategyCost> candidates) {
  if (candidates.empty()) throw std::invalid_argument("pop_useless needs at least one strategy");
  SortedStrategyList kept;
  for (const auto& c : candidates) {
    const bool dominated = std::any_of(candidates.begin(), candidates.end(), [&](const auto& o) {
      return o.cost.time_s <= c.cost.time_s && o.cost.mem_bytes <= c.cost.mem_bytes &&
             (o.cost.time_s < c.cost.time_s || o.cost.mem_bytes < c.cost.mem_bytes);
    });
    if (!dominated) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const StrategyCost& a, const StrategyCost& b) {
    if (a.cost.time_s != b.cost.time_s) return a.cost.time_s < b.cost.time_s;
    if (a.cost.mem_bytes != b.cost.mem_bytes) return a.cost.mem_bytes < b.cost.mem_bytes;
    return a.strategy < b.strategy;
  });
  return kept;
}

const PlanCache::Entry* PlanCache::find(std::int64_t b, std::int64_t s,
                                        std::uint64_t version) const {
  const auto it = entries_.find({b, s, version});
  return it == entries_.end() ? nullptr : &it->second;
}

void PlanCache::store(std::int64_t b, std::int64_t s, std::uint64_t version, Entry entry) {
  entries_[{b, s, version}] = std::move(entry);
}

namespace {

const LayerCost& cost_of(const CostTable& costs, Strategy s) {
  const auto it = costs.find(s);
  if (it == costs.end()) {
    throw std::out_of_range("no cost for strategy " + std::string(strategy_name(s)));
  }
  return it->second;
}

CostTable query_costs(const CostProvider& models, std::int64_t b, std::int64_t s,
                      SelectionCounters* counters) {
  CostTable costs;
  for (Strategy st : models.strategies()) {
    costs[st] = models.layer_cost(st, b, s);
    if (counters) ++counters->predictions;
  }
  if (costs.empty()) throw std::invalid_argument("cost provider has no strategies");
  return costs;
}

StrategyPlan make_plan(std::vector<Strategy> layers, const CostTable& costs) {
  StrategyPlan p;
  p.predicted_time_s = plan_time(layers, costs);
  p.predicted_mem_bytes = plan_mem(layers, costs);
  p.per_layer = std::move(layers);
  return p;
}

StrategyPlan smooth(StrategyPlan winner, const CostTable& costs, double capacity,
                    const SelectOptions& opt) {
  const StrategyPlan* prev = opt.prev_plan;
  if (prev == nullptr || prev->per_layer.size() != winner.per_layer.size()) return winner;
  if (prev->per_layer == winner.per_layer) return winner;
  for (Strategy st : prev->per_layer) {
    if (!costs.count(st)) return winner;
  }
  if (!plan_feasible(prev->per_layer, costs, capacity)) return winner;
  const double t = plan_time(prev->per_layer, costs);
  if (t > (1.0 + opt.gamma) * winner.predicted_time_s) return winner;
  if (opt.counters) ++opt.counters->smoothing_retained;
  return make_plan(prev->per_layer, costs);
}

}  // namespace

bool plan_feasible(std::span<const Strategy> plan, const CostTable& costs, double capacity_bytes,
                   SelectionCounters* counters) {
  double mem = 0.0;
  for (Strategy st : plan) {
    mem += cost_of(costs, st).mem_bytes;
    if (counters) ++counters->layer_evaluations;
    if (mem >= capacity_bytes) return false;
  }
  return mem < capacity_bytes;
}

double plan_time(std::span<const Strategy> plan, const CostTable& costs,
                 SelectionCounters* counters) {
  double t = 0.0;
  for (Strategy st : plan) {
    t += cost_of(costs, st).time_s;
    if (counters) ++counters->layer_evaluations;
  }
  return t;
}

double plan_mem(std::span<const Strategy> plan, const CostTable& costs) {
  double m = 0.0;
  for (Strategy st : plan) m += cost_of(costs, st).mem_bytes;
  return m;
}

bool plan_feasible(std::span<const Strategy> plan, const CostProvider& models, std::int64_t b,
                   std::int64_t s, double capacity_bytes) {
  return plan_feasible(plan, query_costs(models, b, s, nullptr), capacity_bytes);
}

double plan_time(std::span<const Strategy> plan, const CostProvider& models, std::int64_t b,
                 std::int64_t s) {
  return plan_time(plan, query_costs(models, b, s, nullptr));
}

StrategyPlan select_plan(std::int64_t b, std::int64_t s, const ModelConfig& config,
                         const CostProvider& models, PlanCache& cache, double capacity_bytes,
                         const SelectOptions& opt) {
  config.validate();
  if (!(opt.gamma >= 0.0 && opt.gamma < 1.0)) {
    throw std::invalid_argument("gamma must be in [0, 1)");
  }
  const auto L = static_cast<std::size_t>(config.L);
  const std::uint64_t version = models.version();

  if (const auto* hit = cache.find(b, s, version)) {
    if (opt.counters) ++opt.counters->cache_hits;
    return smooth(hit->plan, hit->costs, capacity_bytes, opt);
  }

  const CostTable costs = query_costs(models, b, s, opt.counters);
  std::vector<StrategyCost> candidates;
  for (const auto& [st, c] : costs) candidates.push_back({st, c});
  const SortedStrategyList P = pop_useless(candidates);

  auto finish = [&](std::vector<Strategy> layers) {
    StrategyPlan plan = make_plan(std::move(layers), costs);
    cache.store(b, s, version, PlanCache::Entry{plan, costs});
    return smooth(std::move(plan), costs, capacity_bytes, opt);
  };

  std::vector<std::vector<Strategy>> options;
  for (std::size_t i = 0; i < P.size(); ++i) {
    std::deque<Strategy> strategies(L, P[i].strategy);
    const std::vector<Strategy> uniform(strategies.begin(), strategies.end());
    const bool fits = plan_feasible(uniform, costs, capacity_bytes, opt.counters);
    if (i == 0 && fits) return finish(uniform);
    if (fits) {
      options.push_back(uniform);
      continue;
    }
    // The list keeps mutating across k: after the k-th sweep every layer
    // holds P[k], which becomes the prefix of the next sweep.
    for (std::size_t k = i + 1; k < P.size(); ++k) {
      for (std::size_t l = 0; l < L; ++l) {
        strategies.pop_front();
        strategies.push_back(P[k].strategy);
        std::vector<Strategy> mixed(strategies.begin(), strategies.end());
        if (plan_feasible(mixed, costs, capacity_bytes, opt.counters)) {
          options.push_back(std::move(mixed));
        }
      }
    }
  }

  if (!options.empty()) {
    std::size_t best = 0;
    double best_time = plan_time(options[0], costs, opt.counters);
    for (std::size_t o = 1; o < options.size(); ++o) {
      const double t = plan_time(options[o], costs, opt.counters);
      if (t < best_time) {
        best_time = t;
        best = o;
      }
    }
    return finish(std::move(options[best]));
  }
  return finish(std::vector<Strategy>(L, P.back().strategy));
}

std::optional<StrategyPlan> brute_force_plan(std::int64_t b, std::int64_t s,
                                             const ModelConfig& config,
                                             const CostProvider& models, double capacity_bytes) {
  config.validate();
  const CostTable costs = query_costs(models, b, s, nullptr);
  std::vector<Strategy> alphabet;
  for (const auto& [st, c] : costs) alphabet.push_back(st);
  const auto L = static_cast<std::size_t>(config.L);
  std::int64_t total = 1;
  for (std::size_t l = 0; l < L; ++l) {
    total *= static_cast<std::int64_t>(alphabet.size());
    if (total > kBruteForceLimit) {
      throw std::invalid_argument("brute force over " + std::to_string(alphabet.size()) + "^" +
                                  std::to_string(L) + " plans exceeds the limit");
    }
  }
  std::optional<StrategyPlan> best;
  std::vector<std::size_t> digits(L, 0);
  std::vector<Strategy> plan(L);
  for (std::int64_t idx = 0; idx < total; ++idx) {
    for (std::size_t l = 0; l < L; ++l) plan[l] = alphabet[digits[l]];
    if (plan_feasible(plan, costs, capacity_bytes)) {
      const double t = plan_time(plan, costs);
      if (!best || t < best->predicted_time_s) best = make_plan(plan, costs);
    }
    for (std::size_t l = L; l-- > 0;) {
      if (++digits[l] < alphabet.size()) break;
      digits[l] = 0;
    }
  }
  return best;
}

}  // namespace hotswitch
