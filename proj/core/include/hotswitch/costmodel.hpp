// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// Sequence-aware cost models. Profiles hold whole-sequence time and peak
// per-device memory; layer costs are the whole-model cost divided by L.
//
// The analytic generator stands in for GPU profiling:
//   time = L [3 F / (flops p) + sum over forward comm (alpha + bytes / bw)]
//     F  = 24 b s h^2 + 4 b s^2 h          (MHA + FFN forward FLOPs)
//   mem  = E [12 h^2 L / p + L saved + transient]
// where `saved` is the per-layer activation kept for backward and
// `transient` is one layer's executor peak (activation + gathered weights).

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hotswitch/forest.hpp"
#include "hotswitch/layouts.hpp"
#include "hotswitch/polyfit.hpp"
#include "hotswitch/strategies.hpp"

namespace hotswitch {

struct GridParams {
  int p = 8;
  double flops_per_s = 150e12;
  double bytes_per_s_link = 100e9;
  double alpha_s = 1e-5;
  int bytes_per_elem = 2;
  std::int64_t capacity_bytes = std::int64_t{80} << 30;
};

struct ProfileRecord {
  ModelConfig config;
  Strategy strategy = Strategy::MegatronTS;
  std::int64_t b = 1;
  std::int64_t s = 1;
  double time_s = 0.0;
  double mem_bytes = 0.0;

  friend bool operator==(const ProfileRecord& a, const ProfileRecord& c) {
    return a.config.h == c.config.h && a.config.n == c.config.n && a.config.L == c.config.L &&
           a.strategy == c.strategy && a.b == c.b && a.s == c.s && a.time_s == c.time_s &&
           a.mem_bytes == c.mem_bytes;
  }
};

// ------------------------------------------------------------- analytic

/// Forward FLOPs of one layer (MHA + FFN).
double layer_forward_flops(const ModelConfig& config, std::int64_t b, std::int64_t s);

/// Activation elements per device one layer keeps for backward.
double saved_activation_elements(Strategy strategy, const ModelConfig& config, std::int64_t b,
                                 std::int64_t s, int p);

struct AnalyticBreakdown {
  double compute_s = 0.0;
  double comm_s = 0.0;
  double param_bytes = 0.0;
  double saved_bytes = 0.0;      // all L layers
  double transient_bytes = 0.0;  // one layer, max over MHA / FFN

  double time_s() const { return compute_s + comm_s; }
  double mem_bytes() const { return param_bytes + saved_bytes + transient_bytes; }
};

/// Throws std::invalid_argument when the strategy's divisibility fails.
AnalyticBreakdown analytic_breakdown(const ModelConfig& config, Strategy strategy,
                                     std::int64_t b, std::int64_t s, const GridParams& grid);

ProfileRecord analytic_profile(const ModelConfig& config, Strategy strategy, std::int64_t b,
                               std::int64_t s, const GridParams& grid);

/// Exact analytic time / memory of a mixed per-layer plan: summed per-layer
/// compute, comm and saved activations, max over layers of the transient.
struct PlanCost {
  double time_s = 0.0;
  double mem_bytes = 0.0;
};
PlanCost analytic_plan_cost(std::span<const Strategy> plan, const ModelConfig& config,
                            std::int64_t b, std::int64_t s, const GridParams& grid);

/// Default length sweep: 1K to 1M, eight points per octave.
std::vector<std::int64_t> default_profile_lengths();

/// Analytic records for each strategy over `lengths`. Lengths the strategy
/// cannot run (divisibility) are skipped; with `stop_at_oom`, a strategy's
/// sweep stops at its first length exceeding grid capacity.
std::vector<ProfileRecord> profile_sweep(const ModelConfig& config,
                                         std::span<const Strategy> strategies, std::int64_t b,
                                         std::span<const std::int64_t> lengths,
                                         const GridParams& grid, bool stop_at_oom = true);

// ------------------------------------------------------------ CSV I/O

inline constexpr std::string_view kProfileCsvHeader = "strategy,h,n,L,b,s,time_s,mem_bytes";

/// Parses profile CSV. Errors name `source` and the 1-based line.
std::vector<ProfileRecord> read_profiles(std::istream& in, std::string_view source = "<input>");
std::vector<ProfileRecord> ingest_profiles(const std::string& path);
void write_profiles(std::ostream& out, std::span<const ProfileRecord> records);
void export_profiles(const std::string& path, std::span<const ProfileRecord> records);

// --------------------------------------------------------- cost provider

struct LayerCost {
  double time_s = 0.0;
  double mem_bytes = 0.0;
};

/// Per-layer cost source used by the selector.
class CostProvider {
 public:
  virtual ~CostProvider() = default;
  virtual std::vector<Strategy> strategies() const = 0;
  virtual LayerCost layer_cost(Strategy strategy, std::int64_t b, std::int64_t s) const = 0;
  /// Changes whenever predictions may change (refit, mode switch).
  virtual std::uint64_t version() const = 0;
};

/// Ground-truth provider backed by the analytic generator.
class AnalyticCostProvider : public CostProvider {
 public:
  AnalyticCostProvider(ModelConfig config, GridParams grid, std::vector<Strategy> strategies);

  std::vector<Strategy> strategies() const override { return strategies_; }
  LayerCost layer_cost(Strategy strategy, std::int64_t b, std::int64_t s) const override;
  std::uint64_t version() const override { return 0; }

  const ModelConfig& config() const { return config_; }
  const GridParams& grid() const { return grid_; }

 private:
  ModelConfig config_;
  GridParams grid_;
  std::vector<Strategy> strategies_;
};

// ------------------------------------------------------- hybrid models

enum class Target { Time, Memory };
enum class Branch { Forest, Poly };

std::string_view branch_name(Branch b);

/// One-hot over the strategies present, then min-max normalized h, n, L, s.
class FeatureEncoder {
 public:
  FeatureEncoder() = default;
  static FeatureEncoder fit(std::span<const ProfileRecord> records);

  std::vector<double> encode(const ModelConfig& config, Strategy strategy, double s) const;
  std::size_t width() const { return strategies_.size() + 4; }
  const std::vector<Strategy>& strategies() const { return strategies_; }

  std::string to_json() const;
  static FeatureEncoder from_json(std::string_view text);

 private:
  std::vector<Strategy> strategies_;
  std::array<double, 4> lo_{};
  std::array<double, 4> hi_{};
};

/// Forests shared by every strategy of a bundle; they fit log(target).
struct SharedForests {
  FeatureEncoder encoder;
  ForestModel time;
  ForestModel mem;
};

/// Forest iff s <= s_profile_max, polynomial otherwise.
class HybridCostModel {
 public:
  HybridCostModel() = default;
  HybridCostModel(Strategy strategy, ModelConfig config,
                  std::shared_ptr<const SharedForests> forests, PolyModel poly_time,
                  PolyModel poly_mem, std::int64_t s_profile_max, double oom_threshold);

  /// Whole-sequence prediction. `force_poly` skips the forest everywhere.
  double predict(std::int64_t s, Target target, Branch* branch = nullptr,
                 bool force_poly = false) const;
  Branch branch_for(std::int64_t s) const;
  bool predicts_oom(std::int64_t s, bool force_poly = false) const;

  Strategy strategy() const { return strategy_; }
  std::int64_t s_profile_max() const { return s_profile_max_; }
  double oom_threshold() const { return oom_threshold_; }
  void set_oom_threshold(double bytes) { oom_threshold_ = bytes; }
  const PolyModel& poly(Target t) const { return t == Target::Time ? poly_time_ : poly_mem_; }
  bool fitted() const { return forests_ != nullptr; }

 private:
  Strategy strategy_ = Strategy::MegatronTS;
  ModelConfig config_;
  std::shared_ptr<const SharedForests> forests_;
  PolyModel poly_time_;
  PolyModel poly_mem_;
  std::int64_t s_profile_max_ = 0;
  double oom_threshold_ = 0.0;
};

/// Fitted hybrid models of one (config, b) for every profiled strategy.
class CostModelBundle : public CostProvider {
 public:
  /// Fits forests on all records (any config) and per-strategy polynomials
  /// on the records of `config`. OOM thresholds default to `oom_threshold`.
  static CostModelBundle fit(std::span<const ProfileRecord> records, const ModelConfig& config,
                             double oom_threshold, const ForestParams& params = {});

  std::vector<Strategy> strategies() const override;
  LayerCost layer_cost(Strategy strategy, std::int64_t b, std::int64_t s) const override;
  std::uint64_t version() const override { return version_; }

  const HybridCostModel& model(Strategy s) const;
  HybridCostModel& model(Strategy s);
  const ModelConfig& config() const { return config_; }
  std::int64_t batch() const { return b_; }

  /// Polynomial-only prediction (the "without RF" ablation).
  void set_poly_only(bool on);
  bool poly_only() const { return poly_only_; }
  /// Copy restricted to `keep` (order preserved from this bundle).
  CostModelBundle restricted(std::span<const Strategy> keep) const;

  std::string to_json() const;
  static CostModelBundle from_json(std::string_view text);
  void save(const std::string& path) const;
  static CostModelBundle load(const std::string& path);

 private:
  ModelConfig config_;
  std::int64_t b_ = 1;
  std::shared_ptr<const SharedForests> forests_;
  std::map<Strategy, HybridCostModel> models_;
  bool poly_only_ = false;
  std::uint64_t version_ = 1;
};

}  // namespace hotswitch
