// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// Strategy function library: one MHA and one FFN executor per parallel
// strategy. Every executor reads and writes the unified layouts (activations
// b x s/p x h, weights per spec_layout), so any two strategies can be
// chained layer to layer without redistributing tensors.
//
// Dense W_qkv columns are head-major: head j owns columns [3dj, 3dj + 3d),
// split as q | k | v. A contiguous 3h/p column block is therefore a group of
// n/p heads. W_proj rows follow the same head order.

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "hotswitch/layouts.hpp"
#include "hotswitch/simgrid.hpp"
#include "hotswitch/tensor.hpp"

namespace hotswitch {

enum class Strategy { MegatronTS, MegatronCZ, UlyssesZ, ColossalZ, METP };

inline constexpr std::array<Strategy, 5> kAllStrategies = {
    Strategy::MegatronTS, Strategy::MegatronCZ, Strategy::UlyssesZ, Strategy::ColossalZ,
    Strategy::METP};

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
/// ColossalZ is kept in the library but left out of evaluation runs.
bool eval_excluded(Strategy s);
/// The strategies used for evaluation (all minus eval-excluded ones).
std::vector<Strategy> evaluation_strategies();

enum class OpKind { MHA, FFN };
std::string_view op_name(OpKind op);

/// Full weights of one layer in math orientation.
struct DenseWeights {
  SimTensor w_qkv;   // h x 3h, head-major columns
  SimTensor w_proj;  // h x h
  SimTensor w_in;    // h x 4h
  SimTensor w_out;   // 4h x h

  static DenseWeights random(const ModelConfig& config, std::mt19937_64& rng);
};

/// Per-device weight shards in the unified layout.
struct LayerWeights {
  Shards w_qkv;   // (3h/p x h)^T
  Shards w_proj;  // h/p x h
  Shards w_in;    // (4h/p x h)^T
  Shards w_out;   // 4h/p x h

  static LayerWeights from_dense(const DenseWeights& dense, const ModelConfig& config,
                                 const DeviceGrid& grid);
  DenseWeights to_dense(const ModelConfig& config) const;
  /// Elements stored per device.
  std::int64_t elements_per_device() const;
};

SimTensor reference_mha(const SimTensor& x, const DenseWeights& weights, std::int64_t heads);
SimTensor reference_ffn(const SimTensor& x, const DenseWeights& weights);

using Executor = Shards (*)(DeviceGrid& grid, std::span<const SimTensor> input,
                            const LayerWeights& weights, const ModelConfig& config);

/// Divisibility requirements for running `s` on `p` devices
/// (p | s always; p | n for head-parallel strategies).
void check_preconditions(Strategy s, const ModelConfig& config, std::int64_t seq_len, int p);

Shards mha(Strategy s, DeviceGrid& grid, std::span<const SimTensor> x_shards,
           const LayerWeights& weights, const ModelConfig& config);
Shards ffn(Strategy s, DeviceGrid& grid, std::span<const SimTensor> x_shards,
           const LayerWeights& weights, const ModelConfig& config);

/// Ordered communication entries (primitive, per-device payload bytes) that
/// one executor call logs.
struct CommStep {
  Primitive primitive;
  std::int64_t bytes;

  friend bool operator==(const CommStep&, const CommStep&) = default;
};
std::vector<CommStep> comm_schedule(Strategy s, OpKind op, const ModelConfig& config,
                                    std::int64_t seq_len, int p, int bytes_per_elem);

/// Closed-form per-device peaks (in elements) of one executor call, counting
/// the executor's own buffers and its output but not its input shards.
struct PeakElements {
  std::int64_t activation = 0;
  std::int64_t parameter = 0;
};
PeakElements executor_peak(Strategy s, OpKind op, const ModelConfig& config,
                           std::int64_t seq_len, int p);

class FunctionRegistry {
 public:
  /// Registry with every built-in strategy.
  static const FunctionRegistry& builtin();

  void add(Strategy s, OpKind op, Executor fn);
  /// Throws std::out_of_range for unregistered pairs.
  Executor lookup(Strategy s, OpKind op) const;
  bool contains(Strategy s, OpKind op) const;
  std::vector<Strategy> strategies() const;

 private:
  std::map<std::pair<Strategy, OpKind>, Executor> table_;
};

}  // namespace hotswitch
