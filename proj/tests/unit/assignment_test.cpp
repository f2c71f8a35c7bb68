// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <random>

#include "locata/assignment.hpp"
#include "oracles.hpp"

TEST(Assignment, TwoByTwoExample) {
  Eigen::MatrixXd c(2, 2);
  c << 5, 20, 10, 3;
  const auto a = locata::solve_assignment(c);
  EXPECT_EQ(a.row_to_col, (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(a.total_cost, 8.0);
}

TEST(Assignment, EmptyAndRectangular) {
  EXPECT_TRUE(locata::solve_assignment(Eigen::MatrixXd(0, 3)).row_to_col.empty());
  const auto a = locata::solve_assignment(Eigen::MatrixXd(2, 0));
  EXPECT_EQ(a.row_to_col, (std::vector<int>{-1, -1}));
  Eigen::MatrixXd tall(3, 1);
  tall << 4, 1, 7;
  const auto t = locata::solve_assignment(tall);
  EXPECT_EQ(t.row_to_col, (std::vector<int>{-1, 0, -1}));
  EXPECT_DOUBLE_EQ(t.total_cost, 1.0);
}

TEST(Assignment, NonFiniteThrows) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
  c(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(locata::solve_assignment(c), locata::ArgumentError);
}

TEST(Assignment, MatchesExhaustiveSearch) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 7);
  std::uniform_real_distribution<double> val(0.0, 100.0);
  std::uniform_int_distribution<int> ival(0, 9);
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = dim(rng), c = dim(rng);
    Eigen::MatrixXd m(r, c);
    const bool integer = trial % 3 == 0;  // many ties
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = integer ? ival(rng) : val(rng);
    const auto a = locata::solve_assignment(m);
    const double best = oracles::brute_force_assignment(m);
    ASSERT_NEAR(a.total_cost, best, 1e-9 * (1.0 + best)) << "trial " << trial;
    // valid injection of min(r, c) pairs
    std::vector<int> seen(static_cast<std::size_t>(c), 0);
    int pairs = 0;
    for (int col : a.row_to_col) {
      if (col < 0) continue;
      ASSERT_EQ(seen[static_cast<std::size_t>(col)]++, 0);
      ++pairs;
    }
    ASSERT_EQ(pairs, std::min(r, c));
  }
}
