// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/polyfit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <set>
#include <stdexcept>

namespace hotswitch {

double PolyModel::predict(double s) const {
  if (!fitted()) throw std::logic_error("predict on an unfitted polynomial");
  const double u = s / s_scale;
  double acc = 0.0;
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * u + *it;
  return acc;
}

double poly_aic(std::size_t n, double rss, int k, double max_abs_y) {
  const auto nd = static_cast<double>(n);
  const double floor = nd * std::pow(1e-9 * max_abs_y, 2);
  const double r = std::max({rss, floor, std::numeric_limits<double>::min()});
  return nd * std::log(r / nd) + 2.0 * k;
}

PolyModel fit_poly(std::span<const double> s, std::span<const double> y) {
  if (s.size() != y.size()) throw std::invalid_argument("fit_poly: s/y size mismatch");
  const std::set<double> distinct(s.begin(), s.end());
  if (distinct.size() < 2) {
    throw std::invalid_argument("fit_poly needs at least 2 distinct s values, got " +
                                std::to_string(distinct.size()));
  }
  PolyModel best;
  best.s_min = *distinct.begin();
  best.s_max = *distinct.rbegin();
  best.s_scale = std::max(std::abs(best.s_min), std::abs(best.s_max));
  best.aic.fill(std::numeric_limits<double>::quiet_NaN());

  const auto n = static_cast<Eigen::Index>(s.size());
  double max_abs_y = 0.0;
  for (double v : y) max_abs_y = std::max(max_abs_y, std::abs(v));
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) rhs(i) = y[static_cast<std::size_t>(i)];

  double best_aic = std::numeric_limits<double>::infinity();
  for (int degree = 1; degree <= kMaxPolyDegree; ++degree) {
    if (distinct.size() < static_cast<std::size_t>(degree + 1)) break;
    Eigen::MatrixXd a(n, degree + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = s[static_cast<std::size_t>(i)] / best.s_scale;
      double v = 1.0;
      for (int c = 0; c <= degree; ++c, v *= u) a(i, c) = v;
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);
    const double rss = (a * coef - rhs).squaredNorm();
    const double score = poly_aic(s.size(), rss, degree + 1, max_abs_y);
    best.aic[static_cast<std::size_t>(degree - 1)] = score;
    if (score < best_aic) {
      best_aic = score;
      best.degree = degree;
      best.coefficients.assign(coef.data(), coef.data() + coef.size());
    }
  }
  return best;
}

std::string PolyModel::to_json() const {
  nlohmann::ordered_json j;
  j["degree"] = degree;
  j["coefficients"] = coefficients;
  j["s_scale"] = s_scale;
  j["s_min"] = s_min;
  j["s_max"] = s_max;
  return j.dump();
}

PolyModel PolyModel::from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  PolyModel m;
  m.degree = j.at("degree").get<int>();
  m.coefficients = j.at("coefficients").get<std::vector<double>>();
  m.s_scale = j.at("s_scale").get<double>();
  m.s_min = j.at("s_min").get<double>();
  m.s_max = j.at("s_max").get<double>();
  m.aic.fill(std::numeric_limits<double>::quiet_NaN());
  if (m.degree < 1 || m.degree > kMaxPolyDegree ||
      m.coefficients.size() != static_cast<std::size_t>(m.degree + 1) || !(m.s_scale > 0)) {
    throw std::invalid_argument("malformed polynomial model JSON");
  }
  return m;
}

}  // namespace hotswitch
