// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hotswitch {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw std::invalid_argument("negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

SimTensor::SimTensor(Shape s, int dev)
    : shape(std::move(s)), data(static_cast<std::size_t>(hotswitch::numel(shape)), 0.0),
      device(dev) {}

SimTensor::SimTensor(Shape s, std::vector<double> d, int dev)
    : shape(std::move(s)), data(std::move(d)), device(dev) {
  if (hotswitch::numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
}

std::int64_t SimTensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " +
                            shape_str(shape));
  }
  return shape[static_cast<std::size_t>(axis)];
}

SimTensor random_tensor(Shape shape, std::mt19937_64& rng, double scale, int device) {
  SimTensor t(std::move(shape), device);
  // Map raw 64-bit draws to [-1, 1) directly so streams are reproducible
  // across standard library implementations.
  for (auto& v : t.data) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = scale * (2.0 * u - 1.0);
  }
  return t;
}

namespace {

struct AxisSplit {
  std::int64_t outer;
  std::int64_t extent;
  std::int64_t inner;
};

AxisSplit split_at(const Shape& shape, int axis) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw std::out_of_range("axis " + std::to_string(axis) + " out of range for " +
                            shape_str(shape));
  }
  AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) {
    s.inner *= shape[i];
  }
  return s;
}

// Leading extents flattened into rows, last axis as columns.
std::pair<std::int64_t, std::int64_t> rows_cols(const SimTensor& t) {
  if (t.rank() < 1) throw std::invalid_argument("matmul operand must have rank >= 1");
  const auto cols = t.shape.back();
  return {cols == 0 ? 0 : t.numel() / cols, cols};
}

}  // namespace

SimTensor slice(const SimTensor& t, int axis, std::int64_t start, std::int64_t len) {
  const auto sp = split_at(t.shape, axis);
  if (start < 0 || len < 0 || start + len > sp.extent) {
    throw std::out_of_range("slice [" + std::to_string(start) + ", " +
                            std::to_string(start + len) + ") outside axis " +
                            std::to_string(axis) + " of " + shape_str(t.shape));
  }
  Shape out_shape = t.shape;
  out_shape[static_cast<std::size_t>(axis)] = len;
  SimTensor out(out_shape, t.device);
  const auto chunk = len * sp.inner;
  for (std::int64_t o = 0; o < sp.outer; ++o) {
    const auto src = t.data.begin() + (o * sp.extent + start) * sp.inner;
    std::copy(src, src + chunk, out.data.begin() + o * chunk);
  }
  return out;
}

SimTensor concat(std::span<const SimTensor> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of zero tensors");
  const Shape& ref = parts.front().shape;
  std::int64_t total = 0;
  for (const auto& p : parts) {
    if (p.shape.size() != ref.size()) {
      throw std::invalid_argument("concat rank mismatch: " + shape_str(p.shape) + " vs " +
                                  shape_str(ref));
    }
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (static_cast<int>(i) != axis && p.shape[i] != ref[i]) {
        throw std::invalid_argument("concat off-axis mismatch: " + shape_str(p.shape) +
                                    " vs " + shape_str(ref));
      }
    }
    total += split_at(p.shape, axis).extent;
  }
  Shape out_shape = ref;
  out_shape[static_cast<std::size_t>(axis)] = total;
  SimTensor out(out_shape, parts.front().device);
  const auto sp = split_at(out_shape, axis);
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const auto ext = p.shape[static_cast<std::size_t>(axis)];
    const auto chunk = ext * sp.inner;
    for (std::int64_t o = 0; o < sp.outer; ++o) {
      const auto src = p.data.begin() + o * chunk;
      std::copy(src, src + chunk, out.data.begin() + (o * sp.extent + offset) * sp.inner);
    }
    offset += ext;
  }
  return out;
}

SimTensor transpose2d(const SimTensor& t) {
  if (t.rank() != 2) throw std::invalid_argument("transpose2d needs rank 2, got " + shape_str(t.shape));
  const auto r = t.shape[0];
  const auto c = t.shape[1];
  SimTensor out({c, r}, t.device);
  for (std::int64_t i = 0; i < r; ++i) {
    for (std::int64_t j = 0; j < c; ++j) out.data[j * r + i] = t.data[i * c + j];
  }
  return out;
}

SimTensor matmul(const SimTensor& a, const SimTensor& b) {
  if (b.rank() != 2) throw std::invalid_argument("matmul rhs must be rank 2");
  Shape out_shape = a.shape;
  out_shape.back() = b.shape[1];
  SimTensor out(out_shape, a.device);
  matmul_accumulate(out, a, b);
  return out;
}

void matmul_accumulate(SimTensor& acc, const SimTensor& a, const SimTensor& b) {
  const auto [rows, k] = rows_cols(a);
  if (b.rank() != 2 || b.shape[0] != k) {
    throw std::invalid_argument("matmul inner mismatch: " + shape_str(a.shape) + " x " +
                                shape_str(b.shape));
  }
  const auto n = b.shape[1];
  if (acc.numel() != rows * n || acc.shape.back() != n) {
    throw std::invalid_argument("matmul accumulator shape " + shape_str(acc.shape) +
                                " does not fit " + shape_str(a.shape) + " x " +
                                shape_str(b.shape));
  }
  for (std::int64_t i = 0; i < rows; ++i) {
    double* out_row = acc.data.data() + i * n;
    const double* a_row = a.data.data() + i * k;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const double av = a_row[kk];
      const double* b_row = b.data.data() + kk * n;
      for (std::int64_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
    }
  }
}

SimTensor matmul_nt(const SimTensor& a, const SimTensor& bt) {
  const auto [rows, k] = rows_cols(a);
  if (bt.rank() != 2 || bt.shape[1] != k) {
    throw std::invalid_argument("matmul_nt inner mismatch: " + shape_str(a.shape) + " x " +
                                shape_str(bt.shape) + "^T");
  }
  const auto n = bt.shape[0];
  Shape out_shape = a.shape;
  out_shape.back() = n;
  SimTensor out(out_shape, a.device);
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* a_row = a.data.data() + i * k;
    for (std::int64_t j = 0; j < n; ++j) {
      const double* b_row = bt.data.data() + j * k;
      double sum = 0.0;
      for (std::int64_t kk = 0; kk < k; ++kk) sum += a_row[kk] * b_row[kk];
      out.data[i * n + j] = sum;
    }
  }
  return out;
}

void add_inplace(SimTensor& acc, const SimTensor& other) {
  if (acc.shape != other.shape) {
    throw std::invalid_argument("add shape mismatch: " + shape_str(acc.shape) + " vs " +
                                shape_str(other.shape));
  }
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += other.data[i];
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

void gelu_inplace(SimTensor& t) {
  for (auto& v : t.data) v = gelu(v);
}

SimTensor layer_norm(const SimTensor& t, double eps) {
  const auto [rows, cols] = rows_cols(t);
  SimTensor out(t.shape, t.device);
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* x = t.data.data() + i * cols;
    double mean = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) mean += x[j];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::int64_t j = 0; j < cols; ++j) var += (x[j] - mean) * (x[j] - mean);
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::int64_t j = 0; j < cols; ++j) out.data[i * cols + j] = (x[j] - mean) * inv;
  }
  return out;
}

double relative_error(const SimTensor& a, const SimTensor& b) {
  if (a.shape != b.shape) {
    throw std::invalid_argument("relative_error shape mismatch: " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
  }
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    diff = std::max(diff, std::abs(a.data[i] - b.data[i]));
    scale = std::max(scale, std::abs(b.data[i]));
  }
  return diff / std::max(scale, std::numeric_limits<double>::min());
}

}  // namespace hotswitch
