// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hotswitch {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles owned by one simulated device.
struct SimTensor {
  Shape shape;
  std::vector<double> data;
  int device = 0;

  SimTensor() = default;
  /// Zero-filled tensor.
  explicit SimTensor(Shape shape, int device = 0);
  /// Throws std::invalid_argument unless product(shape) == data.size().
  SimTensor(Shape shape, std::vector<double> data, int device = 0);

  std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  std::int64_t dim(int axis) const;
  bool empty() const { return data.empty(); }

  friend bool operator==(const SimTensor& a, const SimTensor& b) {
    return a.shape == b.shape && a.data == b.data;
  }
};

SimTensor random_tensor(Shape shape, std::mt19937_64& rng, double scale = 1.0,
                        int device = 0);

/// Contiguous range [start, start + len) along `axis`.
SimTensor slice(const SimTensor& t, int axis, std::int64_t start,
                std::int64_t len);

/// Concatenates along `axis`; all other extents must agree.
SimTensor concat(std::span<const SimTensor> parts, int axis);

/// Rank-2 transpose.
SimTensor transpose2d(const SimTensor& t);

/// a[..., k] x b[k, n] -> [..., n]
SimTensor matmul(const SimTensor& a, const SimTensor& b);

/// a[..., k] x bt[n, k]^T -> [..., n]. Avoids materializing a transposed
/// weight when the stored block is already transposed.
SimTensor matmul_nt(const SimTensor& a, const SimTensor& bt);

/// acc[..., n] += a[..., k] x b[k, n]
void matmul_accumulate(SimTensor& acc, const SimTensor& a, const SimTensor& b);

void add_inplace(SimTensor& acc, const SimTensor& other);

/// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
double gelu(double x);
void gelu_inplace(SimTensor& t);

/// Per-token layer normalization over the last axis (unit gain, zero bias).
SimTensor layer_norm(const SimTensor& t, double eps = 1e-5);

/// max |a - b| / max(max |b|, tiny). Shapes must match.
double relative_error(const SimTensor& a, const SimTensor& b);

}  // namespace hotswitch
