// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "attention.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hotswitch::detail {

OnlineSoftmax::OnlineSoftmax(std::int64_t batch, std::int64_t rows, std::int64_t heads,
                             std::int64_t head_dim, int device)
    : batch_(batch),
      rows_(rows),
      heads_(heads),
      head_dim_(head_dim),
      acc_({batch, rows, heads * head_dim}, device),
      max_(static_cast<std::size_t>(batch * rows * heads),
           -std::numeric_limits<double>::infinity()),
      sum_(static_cast<std::size_t>(batch * rows * heads), 0.0) {}

void OnlineSoftmax::absorb(const HeadView& q, const HeadView& k, const HeadView& v,
                           DeviceGrid& grid, int device) {
  if (q.rows() != rows_ || k.rows() != v.rows()) {
    throw std::invalid_argument("attention block row mismatch");
  }
  const auto kv_rows = k.rows();
  auto score_row = grid.lease(device, kv_rows);
  scores_.assign(static_cast<std::size_t>(kv_rows), 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));
  const auto width = heads_ * head_dim_;

  for (std::int64_t b = 0; b < batch_; ++b) {
    for (std::int64_t i = 0; i < rows_; ++i) {
      for (std::int64_t j = 0; j < heads_; ++j) {
        const double* qi = q.row(b, i, j);
        double block_max = -std::numeric_limits<double>::infinity();
        for (std::int64_t t = 0; t < kv_rows; ++t) {
          const double* kt = k.row(b, t, j);
          double dot = 0.0;
          for (std::int64_t c = 0; c < head_dim_; ++c) dot += qi[c] * kt[c];
          scores_[static_cast<std::size_t>(t)] = dot * scale;
          block_max = std::max(block_max, scores_[static_cast<std::size_t>(t)]);
        }
        const auto stat = static_cast<std::size_t>((b * rows_ + i) * heads_ + j);
        const double new_max = std::max(max_[stat], block_max);
        const double rescale = std::exp(max_[stat] - new_max);
        double* out = acc_.data.data() + (b * rows_ + i) * width + j * head_dim_;
        for (std::int64_t c = 0; c < head_dim_; ++c) out[c] *= rescale;
        double block_sum = 0.0;
        for (std::int64_t t = 0; t < kv_rows; ++t) {
          const double w = std::exp(scores_[static_cast<std::size_t>(t)] - new_max);
          block_sum += w;
          const double* vt = v.row(b, t, j);
          for (std::int64_t c = 0; c < head_dim_; ++c) out[c] += w * vt[c];
        }
        sum_[stat] = sum_[stat] * rescale + block_sum;
        max_[stat] = new_max;
      }
    }
  }
}

SimTensor OnlineSoftmax::finish() && {
  const auto width = heads_ * head_dim_;
  for (std::int64_t b = 0; b < batch_; ++b) {
    for (std::int64_t i = 0; i < rows_; ++i) {
      for (std::int64_t j = 0; j < heads_; ++j) {
        const auto stat = static_cast<std::size_t>((b * rows_ + i) * heads_ + j);
        double* out = acc_.data.data() + (b * rows_ + i) * width + j * head_dim_;
        for (std::int64_t c = 0; c < head_dim_; ++c) out[c] /= sum_[stat];
      }
    }
  }
  return std::move(acc_);
}

}  // namespace hotswitch::detail
