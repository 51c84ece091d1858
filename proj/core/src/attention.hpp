// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "hotswitch/simgrid.hpp"
#include "hotswitch/tensor.hpp"

namespace hotswitch::detail {

/// Strided view of per-head columns inside a [batch, rows, cols] tensor:
/// head j, channel c lives at column col0 + j * head_stride + c.
struct HeadView {
  const SimTensor* t = nullptr;
  std::int64_t col0 = 0;
  std::int64_t head_stride = 0;

  std::int64_t rows() const { return t->shape[1]; }
  const double* row(std::int64_t b, std::int64_t i, std::int64_t head) const {
    const auto cols = t->shape[2];
    return t->data.data() + (b * rows() + i) * cols + col0 + head * head_stride;
  }
};

/// Blockwise softmax attention with running max / normalizer per query row.
/// The accumulator is [batch, rows, heads * head_dim]; blocks of keys and
/// values can be folded in any order.
class OnlineSoftmax {
 public:
  OnlineSoftmax(std::int64_t batch, std::int64_t rows, std::int64_t heads,
                std::int64_t head_dim, int device);

  /// Folds one key/value block. One score row of kv length is charged to
  /// `device` while the block is processed.
  void absorb(const HeadView& q, const HeadView& k, const HeadView& v, DeviceGrid& grid,
              int device);

  /// Normalized attention output.
  SimTensor finish() &&;

 private:
  std::int64_t batch_, rows_, heads_, head_dim_;
  SimTensor acc_;
  std::vector<double> max_;
  std::vector<double> sum_;
  std::vector<double> scores_;
};

}  // namespace hotswitch::detail
