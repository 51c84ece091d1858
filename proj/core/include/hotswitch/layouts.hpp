// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// Tensor-layout algebra for transformer layer tensors on a 1D grid.
//
// A layout names the stored orientation of a tensor symbolically (in terms
// of b, s, h), marks at most one dimension as split p ways, and records
// whether the stored buffer is the transpose of the matrix used in the
// math. Weight matrices follow X W conventions: W_qkv is h x 3h, W_proj
// h x h, W_in h x 4h, W_out 4h x h.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hotswitch/simgrid.hpp"
#include "hotswitch/tensor.hpp"

namespace hotswitch {

/// Transformer hyperparameters (hidden size, heads, layers) plus batch size.
struct ModelConfig {
  std::int64_t h = 0;
  std::int64_t n = 0;
  std::int64_t L = 0;
  std::int64_t b = 1;

  std::int64_t head_dim() const { return h / n; }
  /// Throws std::invalid_argument unless all positive and n | h.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class Role { XMha, O, XFfn, Z, WQkv, WProj, WIn, WOut };

/// Parallel methods whose native layouts are catalogued.
enum class Method {
  MegatronTP,
  MegatronTPSP,
  MegatronCP,
  DeepSpeedUlysses,
  DeepSpeedZeRO3,
  ColossalAISP,
  METP,
};

inline constexpr Role kAllRoles[] = {Role::XMha, Role::O,     Role::XFfn, Role::Z,
                                     Role::WQkv, Role::WProj, Role::WIn,  Role::WOut};
inline constexpr Method kAllMethods[] = {
    Method::MegatronTP,     Method::MegatronTPSP, Method::MegatronCP, Method::DeepSpeedUlysses,
    Method::DeepSpeedZeRO3, Method::ColossalAISP, Method::METP};

std::string_view role_name(Role role);
std::string_view method_name(Method method);
bool is_activation(Role role);

enum class Axis { b, s, h };

struct SymDim {
  std::int64_t coef = 1;
  Axis axis = Axis::h;

  friend bool operator==(const SymDim&, const SymDim&) = default;
};

struct TensorLayout {
  Role role = Role::XMha;
  std::vector<SymDim> dims;      // stored orientation, unsharded
  std::optional<int> shard_dim;  // the single split dimension, if any
  int shard_count = 1;           // p
  bool transposed = false;
  Shape full_shape;              // concrete stored-orientation extents

  /// The dimension actually split across devices (none when p == 1).
  std::optional<int> effective_shard_dim() const;
  /// Per-device stored shape.
  Shape shard_shape() const;
  /// Dense shape in math orientation.
  Shape dense_shape() const;
  /// Rendering such as "b×s/p×h" or "(3h/p×h)^T".
  std::string symbolic() const;
};

/// The unified layout every strategy consumes and produces.
/// Throws std::invalid_argument naming the axis when a split dimension is
/// not divisible by p.
TensorLayout spec_layout(Role role, const ModelConfig& config, std::int64_t seq_len, int p);

/// A parallel method's native layout.
TensorLayout method_layout(Method method, Role role, const ModelConfig& config,
                           std::int64_t seq_len, int p);

/// True iff the consumer can read the producer's shards as-is: same role
/// family, same stored extents, same effective split and same shard count.
bool compatible(const TensorLayout& producer, const TensorLayout& consumer);

/// Splits a dense (math-orientation) tensor into per-device stored shards.
/// Unsplit layouts are replicated.
Shards shard(const SimTensor& dense, const TensorLayout& layout, const DeviceGrid& grid);

/// Inverse of shard().
SimTensor unshard(std::span<const SimTensor> shards, const TensorLayout& layout);

/// Rejects shards whose count or shapes do not match the layout.
void check_conformance(std::span<const SimTensor> shards, const TensorLayout& layout);

/// JSON document with every method row and the specification row, one
/// symbolic cell per tensor group.
std::string layout_table_json(const ModelConfig& config, std::int64_t seq_len, int p);

}  // namespace hotswitch
