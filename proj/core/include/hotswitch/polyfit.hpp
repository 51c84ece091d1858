// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// Least-squares polynomial fits in s of degree 1..3, degree chosen by AIC.

#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hotswitch {

inline constexpr int kMaxPolyDegree = 3;

struct PolyModel {
  int degree = 0;
  /// Coefficients in powers of (s / s_scale), constant term first.
  std::vector<double> coefficients;
  double s_scale = 1.0;
  double s_min = 0.0;
  double s_max = 0.0;
  /// AIC per candidate degree 1..3; NaN where the degree was not fittable.
  std::array<double, kMaxPolyDegree> aic{};

  double predict(double s) const;
  bool fitted() const { return degree > 0; }

  std::string to_json() const;
  static PolyModel from_json(std::string_view text);
};

/// AIC = n ln(RSS / n) + 2k. RSS is floored at n (1e-9 max|y|)^2 so exact
/// fits of different degrees compare by parameter count alone.
double poly_aic(std::size_t n, double rss, int k, double max_abs_y);

/// Fits degrees 1..3 (each needs degree + 1 distinct s values) and keeps the
/// minimum-AIC one; ties go to the lower degree. Throws std::invalid_argument
/// with fewer than 2 distinct s values.
PolyModel fit_poly(std::span<const double> s, std::span<const double> y);

}  // namespace hotswitch
