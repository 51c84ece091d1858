// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// Bagged CART regression forest with variance-reduction splits.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hotswitch {

struct ForestParams {
  int tree_count = 50;
  int max_depth = 10;
  std::uint64_t seed = 42;
};

class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    friend bool operator==(const Node&, const Node&) = default;
  };

  /// Fits on the given row multiset (rows may repeat).
  static RegressionTree fit(const std::vector<std::vector<double>>& x,
                            std::span<const double> y, std::vector<std::size_t> rows,
                            int max_depth);

  double predict(std::span<const double> features) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  int depth() const;

  static RegressionTree from_nodes(std::vector<Node> nodes);

 private:
  int build(const std::vector<std::vector<double>>& x, std::span<const double> y,
            std::vector<std::size_t>& rows, std::size_t begin, std::size_t end, int depth,
            int max_depth);

  std::vector<Node> nodes_;
};

class ForestModel {
 public:
  /// Throws std::invalid_argument on empty or ragged input.
  static ForestModel fit(const std::vector<std::vector<double>>& x, std::span<const double> y,
                         const ForestParams& params = {});

  /// Mean of the tree outputs.
  double predict(std::span<const double> features) const;

  std::size_t tree_count() const { return trees_.size(); }
  std::size_t feature_count() const { return features_; }
  const ForestParams& params() const { return params_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }

  std::string to_json() const;
  static ForestModel from_json(std::string_view text);

 private:
  ForestParams params_;
  std::size_t features_ = 0;
  std::vector<RegressionTree> trees_;
};

}  // namespace hotswitch
