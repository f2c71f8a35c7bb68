// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Exhaustive-enumeration references for assignment and OSPA.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracles {

/// Minimum total cost over all injections of the smaller side into the larger one.
inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  const Eigen::MatrixXd m = cost.rows() <= cost.cols() ? cost : Eigen::MatrixXd(cost.transpose());
  const auto rows = m.rows(), cols = m.cols();
  if (rows == 0) return 0.0;
  std::vector<char> used(static_cast<std::size_t>(cols), 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(Eigen::Index, double)> go = [&](Eigen::Index r, double acc) {
    if (r == rows) {
      best = std::min(best, acc);
      return;
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (used[static_cast<std::size_t>(c)]) continue;
      used[static_cast<std::size_t>(c)] = 1;
      go(r + 1, acc + m(r, c));
      used[static_cast<std::size_t>(c)] = 0;
    }
  };
  go(0, 0.0);
  return best;
}

/// Azimuth difference in degrees via mod(x + 180, 360) - 180.
inline double az_diff_deg(double truth_deg, double est_deg) {
  const double x = truth_deg - est_deg + 180.0;
  return x - 360.0 * std::floor(x / 360.0) - 180.0;
}

/// OSPA between two azimuth sets given in degrees, by enumerating every injection.
inline double brute_force_ospa(std::vector<double> a, std::vector<double> b, double p, double c) {
  if (a.size() > b.size()) std::swap(a, b);
  if (b.empty()) return 0.0;
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j)
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::pow(std::min(c, std::abs(az_diff_deg(a[i], b[j]))), p);
  const double assigned = brute_force_assignment(cost);
  const double card = static_cast<double>(b.size() - a.size()) * std::pow(c, p);
  return std::pow((assigned + card) / static_cast<double>(b.size()), 1.0 / p);
}

}  // namespace oracles
