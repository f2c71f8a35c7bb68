// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Munkres (Hungarian) minimum-cost assignment for rectangular cost matrices.
// Shared by the evaluation association step, OSPA and the multi-track associator.

#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include "locata/error.hpp"

namespace locata {

struct Assignment {
  /// row_to_col[i] is the column assigned to row i, or -1.
  std::vector<int> row_to_col;
  /// Sum of the assigned entries, accumulated in row order.
  double total_cost = 0.0;
};

/// Assigns min(rows, cols) pairs minimizing the total cost. Costs must be finite.
inline Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  Assignment out;
  const auto rows = cost.rows();
  const auto cols = cost.cols();
  out.row_to_col.assign(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return out;
  if (!cost.allFinite()) throw ArgumentError("solve_assignment: non-finite cost");

  const bool transposed = rows > cols;
  const Eigen::MatrixXd a = transposed ? Eigen::MatrixXd(cost.transpose()) : cost;
  const auto n = static_cast<std::size_t>(a.rows());
  const auto m = static_cast<std::size_t>(a.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Shortest augmenting path with row/column potentials; 1-based with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    const auto r = p[j] - 1;
    const auto c = j - 1;
    if (transposed)
      out.row_to_col[c] = static_cast<int>(r);
    else
      out.row_to_col[r] = static_cast<int>(c);
  }
  for (std::size_t i = 0; i < out.row_to_col.size(); ++i) {
    if (out.row_to_col[i] >= 0) out.total_cost += cost(static_cast<Eigen::Index>(i), out.row_to_col[i]);
  }
  return out;
}

}  // namespace locata
