// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <random>

#include "locata/geometry.hpp"

namespace geo = locata::geometry;
using geo::kPi;
using geo::Vec3;

TEST(WrapAngle, Examples) {
  EXPECT_DOUBLE_EQ(geo::wrap_angle(0.0), 0.0);
  EXPECT_NEAR(geo::wrap_angle(3 * kPi), -kPi, 1e-12);
  EXPECT_NEAR(geo::wrap_angle(-7 * kPi / 2), kPi / 2, 1e-12);
  EXPECT_NEAR(geo::wrap_angle(kPi), -kPi, 1e-15);
}

TEST(WrapAngle, NonFiniteThrows) {
  EXPECT_THROW(geo::wrap_angle(std::numeric_limits<double>::infinity()), locata::DomainError);
  EXPECT_THROW(geo::wrap_angle(std::nan("")), locata::DomainError);
}

TEST(WrapAngle, RangeCongruenceIdempotence) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng);
    const double w = geo::wrap_angle(x);
    ASSERT_GE(w, -kPi);
    ASSERT_LT(w, kPi);
    const double k = (x - w) / (2 * kPi);
    ASSERT_NEAR(k, std::round(k), 1e-9);
    ASSERT_EQ(geo::wrap_angle(w), w);
  }
}

TEST(Doa, UnitVectorAxes) {
  const auto x = geo::doa_to_unit_vector(geo::Doa(0, kPi / 2));
  EXPECT_NEAR((x - Vec3(1, 0, 0)).norm(), 0, 1e-15);
  const auto y = geo::doa_to_unit_vector(geo::Doa(kPi / 2, kPi / 2));
  EXPECT_NEAR((y - Vec3(0, 1, 0)).norm(), 0, 1e-15);
  const auto z = geo::doa_to_unit_vector(geo::Doa(0, 0));
  EXPECT_NEAR((z - Vec3(0, 0, 1)).norm(), 0, 1e-15);
}

TEST(Doa, StoredRanges) {
  geo::Doa d(4.0, 4.0);
  EXPECT_GE(d.azimuth(), -kPi);
  EXPECT_LT(d.azimuth(), kPi);
  EXPECT_DOUBLE_EQ(d.elevation(), kPi);
  EXPECT_DOUBLE_EQ(geo::Doa(0, -0.5).elevation(), 0.0);
}

TEST(Doa, RoundTripAwayFromPoles) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> az(-kPi, kPi), el(0.05, kPi - 0.05);
  for (int i = 0; i < 5000; ++i) {
    geo::Doa d(az(rng), el(rng));
    const auto v = geo::doa_to_unit_vector(d);
    ASSERT_NEAR(v.norm(), 1.0, 1e-12);
    const auto back = geo::unit_vector_to_doa(v);
    ASSERT_NEAR(geo::wrap_angle(back.azimuth() - d.azimuth()), 0.0, 1e-12);
    ASSERT_NEAR(back.elevation(), d.elevation(), 1e-12);
  }
}

TEST(GlobalToLocal, IdentityAndTranslation) {
  const auto a = geo::global_to_local(Vec3(1, 0, 0), geo::Pose::at(Vec3::Zero(), 0));
  EXPECT_NEAR(a.azimuth(), 0, 1e-12);
  EXPECT_NEAR(a.elevation(), kPi / 2, 1e-12);
  const auto b = geo::global_to_local(Vec3::Zero(), geo::Pose::at(Vec3(-1, 0, 0), 0));
  EXPECT_NEAR(b.azimuth(), 0, 1e-12);
  EXPECT_NEAR(b.elevation(), kPi / 2, 1e-12);
}

TEST(GlobalToLocal, RotatedArrayFollowsTransposeContract) {
  // R = 90 deg about z; R^T (0,1,0) = (1,0,0), so the local azimuth is 0.
  geo::Pose p(Vec3::Zero(), geo::rotation_about_z(kPi / 2), 0);
  const auto d = geo::global_to_local(Vec3(0, 1, 0), p);
  EXPECT_NEAR(d.azimuth(), 0.0, 1e-12);
  EXPECT_NEAR(d.elevation(), kPi / 2, 1e-12);
  // and a source on global +x appears at local -90 deg
  EXPECT_NEAR(geo::global_to_local(Vec3(1, 0, 0), p).azimuth(), -kPi / 2, 1e-12);
}

TEST(GlobalToLocal, CoincidentThrows) {
  EXPECT_THROW(geo::global_to_local(Vec3(1, 2, 3), geo::Pose::at(Vec3(1, 2, 3), 0)),
               locata::DegenerateGeometryError);
}

TEST(GlobalToLocal, MatchesRotatedDifferenceProperty) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    const geo::Mat3 r = q.normalized().toRotationMatrix();
    const Vec3 t(n(rng), n(rng), n(rng));
    const Vec3 s(n(rng) * 3, n(rng) * 3, n(rng) * 3);
    if ((s - t).norm() < 1e-3) continue;
    geo::Pose p(t, r, 0);
    const Vec3 u = geo::doa_to_unit_vector(geo::global_to_local(s, p));
    const Vec3 expect = r.transpose() * (s - t) / (s - t).norm();
    ASSERT_NEAR((u - expect).norm(), 0, 1e-10);
  }
}

TEST(Pose, RejectsNonRotation) {
  geo::Mat3 m = geo::Mat3::Identity();
  m(0, 0) = -1;  // reflection
  EXPECT_THROW(geo::Pose(Vec3::Zero(), m, 0), locata::DomainError);
}

TEST(InterpolatePose, Examples) {
  std::vector<geo::Pose> s = {geo::Pose(Vec3(0, 0, 0), geo::Mat3::Identity(), 0.0),
                              geo::Pose(Vec3(2, 0, 0), geo::rotation_about_z(kPi / 2), 1.0)};
  geo::Trajectory tr(s, 1.0);
  const auto exact = geo::interpolate_pose(tr, 1.0);
  EXPECT_EQ(exact.translation(), s[1].translation());
  EXPECT_EQ(exact.rotation(), s[1].rotation());
  const auto mid = geo::interpolate_pose(tr, 0.5);
  EXPECT_NEAR((mid.translation() - Vec3(1, 0, 0)).norm(), 0, 1e-12);
  EXPECT_NEAR((mid.rotation() - geo::rotation_about_z(kPi / 4)).norm(), 0, 1e-12);
}

TEST(InterpolatePose, OutOfRangeThrows) {
  auto tr = geo::Trajectory::constant(Vec3::Zero(), geo::Mat3::Identity(), 0.0, 1.0);
  EXPECT_THROW(geo::interpolate_pose(tr, -0.01), locata::OutOfRangeError);
  EXPECT_THROW(geo::interpolate_pose(tr, 1.01), locata::OutOfRangeError);
  EXPECT_NO_THROW(geo::interpolate_pose(tr, 1.0));
}

TEST(InterpolatePose, RotationStaysOrthonormal) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 1);
  std::vector<geo::Pose> s;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
    s.emplace_back(Vec3(n(rng), n(rng), n(rng)), q.normalized().toRotationMatrix(), i / 120.0);
  }
  geo::Trajectory tr(s);
  std::uniform_real_distribution<double> u(0.0, 49 / 120.0);
  for (int i = 0; i < 10000; ++i) {
    const auto p = geo::interpolate_pose(tr, u(rng));
    ASSERT_TRUE(geo::is_rotation(p.rotation(), 1e-9));
  }
}

TEST(Trajectory, RequiresIncreasingTimestamps) {
  std::vector<geo::Pose> s = {geo::Pose::at(Vec3::Zero(), 0.0), geo::Pose::at(Vec3::Zero(), 0.0)};
  EXPECT_THROW(geo::Trajectory(s, 120.0), locata::ArgumentError);
  EXPECT_THROW(geo::Trajectory({}, 120.0), locata::ArgumentError);
}

TEST(ArrayGeometry, Invariants) {
  EXPECT_THROW(geo::ArrayGeometry("one", {Vec3::Zero()}), locata::ArgumentError);
  EXPECT_THROW(geo::ArrayGeometry("dup", {Vec3::Zero(), Vec3(1e-7, 0, 0)}), locata::DegenerateGeometryError);
}

TEST(Presets, MicrophoneCounts) {
  EXPECT_EQ(geo::presets::robot_head().mic_count(), 12u);
  EXPECT_EQ(geo::presets::eigenmike().mic_count(), 32u);
  EXPECT_EQ(geo::presets::dicit().mic_count(), 15u);
  EXPECT_EQ(geo::presets::hearing_aids().mic_count(), 4u);
}

TEST(Presets, Shapes) {
  EXPECT_TRUE(geo::presets::eigenmike().is_spherical());
  EXPECT_TRUE(geo::presets::robot_head().is_spherical());
  EXPECT_FALSE(geo::presets::dicit().is_spherical());
  EXPECT_TRUE(geo::presets::dicit().is_linear());
  EXPECT_FALSE(geo::presets::hearing_aids().is_spherical());
  const auto em = geo::presets::eigenmike();
  for (std::size_t i = 0; i < em.mic_count(); ++i) EXPECT_NEAR(em.mic(i).norm(), 0.042, 1e-12);
}

TEST(Presets, HearingAidSpacing) {
  const auto h = geo::presets::hearing_aids();
  // 9 mm between the two mics of one device, 157 mm between devices
  EXPECT_NEAR((h.mic(0) - h.mic(1)).norm(), 0.009, 1e-12);
  EXPECT_NEAR(std::abs(h.mic(0).y() - h.mic(2).y()), 0.157, 1e-12);
}

TEST(Presets, DicitSubarraysAreUniform) {
  const std::pair<int, std::size_t> cases[] = {{32, 8}, {16, 7}, {8, 5}, {4, 5}};
  for (auto [spacing, count] : cases) {
    const auto sub = geo::presets::dicit_subarray(spacing);
    ASSERT_EQ(sub.mic_count(), count) << spacing;
    for (std::size_t i = 1; i < sub.mic_count(); ++i)
      EXPECT_NEAR((sub.mic(i) - sub.mic(i - 1)).norm(), spacing / 100.0, 1e-12);
  }
  EXPECT_THROW(geo::presets::dicit_subarray(5), locata::ArgumentError);
}

TEST(Presets, ByName) {
  for (const auto& n : geo::presets::names()) EXPECT_EQ(geo::presets::by_name(n).name(), n);
  EXPECT_THROW(geo::presets::by_name("nope"), locata::ArgumentError);
}
