// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/forest.hpp"

#include <algorithm>
#include <json.hpp>
#include <random>
#include <stdexcept>

namespace hotswitch {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  std::size_t left_count = 0;
  double score = 0.0;
};

}  // namespace

RegressionTree RegressionTree::fit(const std::vector<std::vector<double>>& x,
                                   std::span<const double> y, std::vector<std::size_t> rows,
                                   int max_depth) {
  if (rows.empty()) throw std::invalid_argument("regression tree needs at least one row");
  RegressionTree tree;
  tree.build(x, y, rows, 0, rows.size(), 0, max_depth);
  return tree;
}

int RegressionTree::build(const std::vector<std::vector<double>>& x, std::span<const double> y,
                          std::vector<std::size_t>& rows, std::size_t begin, std::size_t end,
                          int depth, int max_depth) {
  const auto count = static_cast<double>(end - begin);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    sum += y[rows[i]];
    sum_sq += y[rows[i]] * y[rows[i]];
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{-1, 0.0, -1, -1, sum / count});

  const double sse = sum_sq - sum * sum / count;
  if (depth >= max_depth || end - begin < 2 || sse <= 1e-12 * std::max(1.0, sum_sq)) return id;

  // Best split maximizes sum_l^2 / n_l + sum_r^2 / n_r, i.e. minimizes SSE.
  Split best;
  best.score = sum * sum / count;
  const double min_gain = 1e-12 * std::max(1.0, sum_sq);
  const std::size_t features = x[rows[begin]].size();
  std::vector<std::size_t> order(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                                 rows.begin() + static_cast<std::ptrdiff_t>(end));
  for (std::size_t f = 0; f < features; ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
    double left = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      left += y[order[i]];
      const double lo = x[order[i]][f];
      const double hi = x[order[i + 1]][f];
      if (!(lo < hi)) continue;
      const auto nl = static_cast<double>(i + 1);
      const double right = sum - left;
      const double score = left * left / nl + right * right / (count - nl);
      if (score > best.score + min_gain) {
        best = Split{static_cast<int>(f), 0.5 * (lo + hi), i + 1, score};
      }
    }
  }
  if (best.feature < 0) return id;

  const auto f = static_cast<std::size_t>(best.feature);
  const auto mid = std::stable_partition(
      rows.begin() + static_cast<std::ptrdiff_t>(begin),
      rows.begin() + static_cast<std::ptrdiff_t>(end),
      [&](std::size_t r) { return x[r][f] <= best.threshold; });
  const auto split_at = static_cast<std::size_t>(mid - rows.begin());

  nodes_[static_cast<std::size_t>(id)].feature = best.feature;
  nodes_[static_cast<std::size_t>(id)].threshold = best.threshold;
  const int left_id = build(x, y, rows, begin, split_at, depth + 1, max_depth);
  const int right_id = build(x, y, rows, split_at, end, depth + 1, max_depth);
  nodes_[static_cast<std::size_t>(id)].left = left_id;
  nodes_[static_cast<std::size_t>(id)].right = right_id;
  return id;
}

double RegressionTree::predict(std::span<const double> features) const {
  if (nodes_.empty()) throw std::logic_error("predict on an unfitted tree");
  std::size_t i = 0;
  while (nodes_[i].feature >= 0) {
    const auto f = static_cast<std::size_t>(nodes_[i].feature);
    if (f >= features.size()) throw std::invalid_argument("feature vector too short");
    i = static_cast<std::size_t>(features[f] <= nodes_[i].threshold ? nodes_[i].left
                                                                    : nodes_[i].right);
  }
  return nodes_[i].value;
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes_[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

RegressionTree RegressionTree::from_nodes(std::vector<Node> nodes) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.feature < 0) continue;
    auto valid = [&](int c) {
      return c > static_cast<int>(i) && c < static_cast<int>(nodes.size());
    };
    if (!valid(n.left) || !valid(n.right)) {
      throw std::invalid_argument("tree node " + std::to_string(i) + " has invalid children");
    }
  }
  if (nodes.empty()) throw std::invalid_argument("tree has no nodes");
  RegressionTree t;
  t.nodes_ = std::move(nodes);
  return t;
}

ForestModel ForestModel::fit(const std::vector<std::vector<double>>& x,
                             std::span<const double> y, const ForestParams& params) {
  if (x.empty()) throw std::invalid_argument("forest fit needs at least one record");
  if (x.size() != y.size()) throw std::invalid_argument("forest fit: x/y size mismatch");
  if (params.tree_count < 1 || params.max_depth < 0) {
    throw std::invalid_argument("forest fit: invalid parameters");
  }
  const std::size_t features = x.front().size();
  for (const auto& row : x) {
    if (row.size() != features) throw std::invalid_argument("forest fit: ragged features");
  }
  ForestModel m;
  m.params_ = params;
  m.features_ = features;
  std::mt19937_64 rng(params.seed);
  const std::size_t n = x.size();
  for (int t = 0; t < params.tree_count; ++t) {
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = static_cast<std::size_t>(rng() % n);
    m.trees_.push_back(RegressionTree::fit(x, y, std::move(rows), params.max_depth));
  }
  return m;
}

double ForestModel::predict(std::span<const double> features) const {
  if (trees_.empty()) throw std::logic_error("predict on an unfitted forest");
  if (features.size() != features_) {
    throw std::invalid_argument("forest expects " + std::to_string(features_) +
                                " features, got " + std::to_string(features.size()));
  }
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(features);
  return sum / static_cast<double>(trees_.size());
}

std::string ForestModel::to_json() const {
  nlohmann::ordered_json j;
  j["tree_count"] = params_.tree_count;
  j["max_depth"] = params_.max_depth;
  j["seed"] = params_.seed;
  j["features"] = features_;
  j["trees"] = nlohmann::ordered_json::array();
  for (const auto& t : trees_) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& n : t.nodes()) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    }
    j["trees"].push_back(std::move(nodes));
  }
  return j.dump();
}

ForestModel ForestModel::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  ForestModel m;
  m.params_.tree_count = j.at("tree_count").get<int>();
  m.params_.max_depth = j.at("max_depth").get<int>();
  m.params_.seed = j.at("seed").get<std::uint64_t>();
  m.features_ = j.at("features").get<std::size_t>();
  for (const auto& tree : j.at("trees")) {
    std::vector<RegressionTree::Node> nodes;
    for (const auto& n : tree) {
      nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                       n.at(3).get<int>(), n.at(4).get<double>()});
    }
    m.trees_.push_back(RegressionTree::from_nodes(std::move(nodes)));
  }
  if (m.trees_.empty()) throw std::invalid_argument("forest JSON has no trees");
  return m;
}

}  // namespace hotswitch
