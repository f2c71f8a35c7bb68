// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Coordinate frames, array geometry presets, pose trajectories and angle arithmetic.
//
// Conventions used throughout the toolkit:
//   * azimuth is measured counter-clockwise from +x and stored in [-pi, pi)
//   * elevation is the inclination from +z, in [0, pi]
//   * unit vector (x, y, z) = (sin el cos az, sin el sin az, cos el)
//   * a Pose maps local array coordinates to global ones: g = R * l + t

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "locata/error.hpp"

namespace locata::geometry {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kDefaultSpeedOfSound = 343.0;
inline constexpr double kDefaultTrajectoryRate = 120.0;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into [-pi, pi). pi itself maps to -pi.
inline double wrap_angle(double angle) {
  if (!std::isfinite(angle)) throw DomainError("wrap_angle: non-finite angle");
  double r = std::fmod(angle + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  double out = r - kPi;
  // fmod can land exactly on the upper bound after the shift
  if (out >= kPi) out -= kTwoPi;
  if (out < -kPi) out = -kPi;
  return out;
}

/// Direction of arrival. Always normalized on construction.
class Doa {
 public:
  Doa() = default;
  Doa(double azimuth, double elevation)
      : azimuth_(wrap_angle(azimuth)),
        elevation_(std::clamp(elevation, 0.0, kPi)) {
    if (!std::isfinite(elevation)) throw DomainError("Doa: non-finite elevation");
  }

  static Doa horizontal(double azimuth) { return Doa(azimuth, kPi / 2.0); }

  double azimuth() const noexcept { return azimuth_; }
  double elevation() const noexcept { return elevation_; }

  friend bool operator==(const Doa&, const Doa&) = default;

 private:
  double azimuth_ = 0.0;
  double elevation_ = kPi / 2.0;
};

inline Vec3 doa_to_unit_vector(const Doa& d) {
  const double se = std::sin(d.elevation());
  return {se * std::cos(d.azimuth()), se * std::sin(d.azimuth()), std::cos(d.elevation())};
}

inline Doa unit_vector_to_doa(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateGeometryError("unit_vector_to_doa: zero vector");
  const Vec3 u = v / n;
  return Doa(std::atan2(u.y(), u.x()), std::acos(std::clamp(u.z(), -1.0, 1.0)));
}

/// Great-circle angle between two directions, radians.
inline double angular_distance(const Doa& a, const Doa& b) {
  const Vec3 ua = doa_to_unit_vector(a);
  const Vec3 ub = doa_to_unit_vector(b);
  return std::atan2(ua.cross(ub).norm(), ua.dot(ub));
}

inline Mat3 rotation_about_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

/// Nearest rotation matrix in the Frobenius sense.
inline Mat3 orthonormalize(const Mat3& r) {
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

class Pose {
 public:
  Pose() = default;
  Pose(Vec3 translation, Mat3 rotation, double timestamp)
      : translation_(std::move(translation)), rotation_(std::move(rotation)), timestamp_(timestamp) {
    if (!is_rotation(rotation_)) throw DomainError("Pose: rotation is not orthonormal with det +1");
    if (!translation_.allFinite() || !std::isfinite(timestamp_)) throw DomainError("Pose: non-finite value");
  }

  static Pose at(const Vec3& translation, double timestamp) {
    return Pose(translation, Mat3::Identity(), timestamp);
  }

  const Vec3& translation() const noexcept { return translation_; }
  const Mat3& rotation() const noexcept { return rotation_; }
  double timestamp() const noexcept { return timestamp_; }

  Vec3 to_global(const Vec3& local) const { return rotation_ * local + translation_; }
  Vec3 to_local(const Vec3& global) const { return rotation_.transpose() * (global - translation_); }

 private:
  Vec3 translation_ = Vec3::Zero();
  Mat3 rotation_ = Mat3::Identity();
  double timestamp_ = 0.0;
};

/// DoA of a global point seen from an array pose (local frame).
inline Doa global_to_local(const Vec3& source_pos, const Pose& array_pose) {
  const Vec3 rel = source_pos - array_pose.translation();
  if (rel.norm() <= 1e-6) throw DegenerateGeometryError("global_to_local: source coincides with array origin");
  return unit_vector_to_doa(array_pose.rotation().transpose() * rel);
}

/// Time-ordered pose samples.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<Pose> samples, double rate_hz = kDefaultTrajectoryRate)
      : samples_(std::move(samples)), rate_hz_(rate_hz) {
    if (!(rate_hz_ > 0.0)) throw ArgumentError("Trajectory: rate must be positive");
    if (samples_.empty()) throw ArgumentError("Trajectory: no samples");
    for (std::size_t i = 1; i < samples_.size(); ++i) {
      if (!(samples_[i].timestamp() > samples_[i - 1].timestamp()))
        throw ArgumentError("Trajectory: timestamps must be strictly increasing");
    }
  }

  /// A constant pose sampled at rate_hz over [t0, t1].
  static Trajectory constant(const Vec3& translation, const Mat3& rotation, double t0, double t1,
                             double rate_hz = kDefaultTrajectoryRate) {
    std::vector<Pose> s;
    const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) * rate_hz - 1e-9)) + 1;
    s.reserve(n);
    for (std::size_t i = 0; i < n; ++i) s.emplace_back(translation, rotation, t0 + static_cast<double>(i) / rate_hz);
    return Trajectory(std::move(s), rate_hz);
  }

  const std::vector<Pose>& samples() const noexcept { return samples_; }
  double rate_hz() const noexcept { return rate_hz_; }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t size() const noexcept { return samples_.size(); }
  double start_time() const { return samples_.front().timestamp(); }
  double end_time() const { return samples_.back().timestamp(); }
  bool covers(double t, double tol = 1e-9) const {
    return !samples_.empty() && t >= start_time() - tol && t <= end_time() + tol;
  }

 private:
  std::vector<Pose> samples_;
  double rate_hz_ = kDefaultTrajectoryRate;
};

/// Pose at time t: linear in translation, geodesic in rotation. No extrapolation.
inline Pose interpolate_pose(const Trajectory& traj, double t) {
  const auto& s = traj.samples();
  if (s.empty() || !std::isfinite(t)) throw OutOfRangeError("interpolate_pose: empty trajectory or bad time");
  constexpr double kTol = 1e-9;
  if (t < s.front().timestamp() - kTol || t > s.back().timestamp() + kTol)
    throw OutOfRangeError("interpolate_pose: time " + std::to_string(t) + " outside [" +
                          std::to_string(s.front().timestamp()) + ", " + std::to_string(s.back().timestamp()) + "]");
  auto it = std::lower_bound(s.begin(), s.end(), t,
                             [](const Pose& p, double v) { return p.timestamp() < v; });
  if (it == s.end()) return s.back();
  if (it->timestamp() == t || it == s.begin()) return *it;
  const Pose& a = *(it - 1);
  const Pose& b = *it;
  const double alpha = (t - a.timestamp()) / (b.timestamp() - a.timestamp());
  const Vec3 trans = (1.0 - alpha) * a.translation() + alpha * b.translation();
  const Eigen::AngleAxisd rel(a.rotation().transpose() * b.rotation());
  Mat3 rot = a.rotation() * Eigen::AngleAxisd(alpha * rel.angle(), rel.axis()).toRotationMatrix();
  if (!is_rotation(rot)) rot = orthonormalize(rot);
  return Pose(trans, rot, t);
}

inline Vec3 interpolate_position(const Trajectory& traj, double t) { return interpolate_pose(traj, t).translation(); }

enum class ArrayShape { Spherical, Linear, Other };

/// Microphone positions in the array's local frame.
class ArrayGeometry {
 public:
  ArrayGeometry() = default;
  ArrayGeometry(std::string name, std::vector<Vec3> mic_positions)
      : name_(std::move(name)), mics_(std::move(mic_positions)) {
    if (mics_.size() < 2) throw ArgumentError("ArrayGeometry: need at least 2 microphones");
    for (std::size_t i = 0; i < mics_.size(); ++i) {
      if (!mics_[i].allFinite()) throw ArgumentError("ArrayGeometry: non-finite position");
      for (std::size_t j = i + 1; j < mics_.size(); ++j) {
        if ((mics_[i] - mics_[j]).norm() <= 1e-6)
          throw DegenerateGeometryError("ArrayGeometry: microphones " + std::to_string(i) + " and " +
                                        std::to_string(j) + " coincide");
      }
    }
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<Vec3>& mic_positions() const noexcept { return mics_; }
  std::size_t mic_count() const noexcept { return mics_.size(); }
  const Vec3& mic(std::size_t i) const { return mics_.at(i); }

  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& m : mics_) c += m;
    return c / static_cast<double>(mics_.size());
  }

  double aperture() const {
    double d = 0.0;
    for (std::size_t i = 0; i < mics_.size(); ++i)
      for (std::size_t j = i + 1; j < mics_.size(); ++j) d = std::max(d, (mics_[i] - mics_[j]).norm());
    return d;
  }

  /// Spherical when the mics sit on a common sphere around the centroid and sample it evenly
  /// enough that sum(n n^T) is close to (M/3) I (first-order design).
  bool is_spherical() const {
    if (mics_.size() < 8) return false;
    const Vec3 c = centroid();
    double mean_r = 0.0;
    for (const auto& m : mics_) mean_r += (m - c).norm();
    mean_r /= static_cast<double>(mics_.size());
    if (mean_r <= 0.0) return false;
    Mat3 scatter = Mat3::Zero();
    for (const auto& m : mics_) {
      const double r = (m - c).norm();
      if (std::abs(r - mean_r) > 0.1 * mean_r) return false;
      const Vec3 n = (m - c) / r;
      scatter += n * n.transpose();
    }
    const Mat3 ideal = Mat3::Identity() * (static_cast<double>(mics_.size()) / 3.0);
    return (scatter - ideal).norm() <= 0.15 * ideal.norm();
  }

  bool is_linear() const {
    const Vec3 axis = (mics_.back() - mics_.front()).normalized();
    for (const auto& m : mics_) {
      const Vec3 d = m - mics_.front();
      if ((d - d.dot(axis) * axis).norm() > 1e-9) return false;
    }
    return true;
  }

  ArrayShape shape() const {
    if (is_linear()) return ArrayShape::Linear;
    if (is_spherical()) return ArrayShape::Spherical;
    return ArrayShape::Other;
  }

  ArrayGeometry subset(std::string name, const std::vector<std::size_t>& indices) const {
    std::vector<Vec3> m;
    m.reserve(indices.size());
    for (auto i : indices) m.push_back(mics_.at(i));
    return ArrayGeometry(std::move(name), std::move(m));
  }

 private:
  std::string name_;
  std::vector<Vec3> mics_;
};

namespace presets {

/// 12 microphones on the vertices of an icosahedron of radius 5 cm. Stand-in for the
/// robot-head layout when no corpus geometry file is available.
inline ArrayGeometry robot_head() {
  const double g = std::numbers::phi;
  const std::vector<Vec3> raw = {
      {0, 1, g}, {0, -1, g}, {0, 1, -g}, {0, -1, -g},
      {1, g, 0}, {-1, g, 0}, {1, -g, 0}, {-1, -g, 0},
      {g, 0, 1}, {-g, 0, 1}, {g, 0, -1}, {-g, 0, -1},
  };
  std::vector<Vec3> mics;
  for (const auto& v : raw) mics.push_back(0.05 * v.normalized());
  return ArrayGeometry("robot_head", std::move(mics));
}

/// 32-capsule spherical layout, radius 42 mm (84 mm baffle), free-field positions.
inline ArrayGeometry eigenmike() {
  // (inclination, azimuth) in degrees, capsules 1..32
  static constexpr double kAngles[32][2] = {
      {69, 0},    {90, 32},   {111, 0},   {90, 328},  {32, 0},    {55, 45},   {90, 69},   {125, 45},
      {148, 0},   {125, 315}, {90, 291},  {55, 315},  {21, 91},   {58, 90},   {121, 90},  {159, 89},
      {69, 180},  {90, 212},  {111, 180}, {90, 148},  {32, 180},  {55, 225},  {90, 249},  {125, 225},
      {148, 180}, {125, 135}, {90, 111},  {55, 135},  {21, 269},  {58, 270},  {122, 270}, {159, 271},
  };
  std::vector<Vec3> mics;
  for (const auto& a : kAngles)
    mics.push_back(0.042 * doa_to_unit_vector(Doa(deg2rad(a[1]), deg2rad(a[0]))));
  return ArrayGeometry("eigenmike", std::move(mics));
}

/// Horizontal positions (cm, left to right) of the 15-element nested linear array.
inline const std::vector<double>& dicit_positions_cm() {
  static const std::vector<double> kPos = {0,   32,  64,  80,  96,  104, 108, 112,
                                           116, 120, 128, 144, 160, 192, 224};
  return kPos;
}

/// 15 microphones along x, centred on the origin; the front half-space is +y.
inline ArrayGeometry dicit() {
  std::vector<Vec3> mics;
  for (double cm : dicit_positions_cm()) mics.emplace_back((cm - 112.0) / 100.0, 0.0, 0.0);
  return ArrayGeometry("dicit", std::move(mics));
}

/// Indices of the DICIT uniform sub-array with the given spacing (4, 8, 16 or 32 cm).
inline std::vector<std::size_t> dicit_subarray_indices(int spacing_cm) {
  if (spacing_cm != 4 && spacing_cm != 8 && spacing_cm != 16 && spacing_cm != 32)
    throw ArgumentError("dicit sub-array spacing must be 4, 8, 16 or 32 cm");
  // longest arithmetic run with this spacing
  const auto& pos = dicit_positions_cm();
  auto has = [&](double v) { return std::find(pos.begin(), pos.end(), v) != pos.end(); };
  std::size_t best_start = 0, best_len = 0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    std::size_t len = 1;
    while (has(pos[i] + static_cast<double>(len * spacing_cm))) ++len;
    if (len > best_len) best_start = i, best_len = len;
  }
  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < best_len; ++k) {
    const double v = pos[best_start] + static_cast<double>(k * spacing_cm);
    idx.push_back(static_cast<std::size_t>(std::find(pos.begin(), pos.end(), v) - pos.begin()));
  }
  return idx;
}

inline ArrayGeometry dicit_subarray(int spacing_cm) {
  return dicit().subset("dicit_" + std::to_string(spacing_cm) + "cm", dicit_subarray_indices(spacing_cm));
}

/// Two behind-the-ear devices, 157 mm apart, two mics each 9 mm apart along x.
inline ArrayGeometry hearing_aids() {
  const double ear = 0.157 / 2.0;
  const double half = 0.009 / 2.0;
  return ArrayGeometry("hearing_aids", {{half, ear, 0}, {-half, ear, 0}, {half, -ear, 0}, {-half, -ear, 0}});
}

inline std::vector<std::string> names() {
  return {"robot_head", "eigenmike", "dicit", "dicit_32cm", "dicit_16cm", "dicit_8cm", "dicit_4cm",
          "hearing_aids"};
}

inline ArrayGeometry by_name(std::string_view name) {
  if (name == "robot_head") return robot_head();
  if (name == "eigenmike") return eigenmike();
  if (name == "dicit") return dicit();
  if (name == "dicit_32cm") return dicit_subarray(32);
  if (name == "dicit_16cm") return dicit_subarray(16);
  if (name == "dicit_8cm") return dicit_subarray(8);
  if (name == "dicit_4cm") return dicit_subarray(4);
  if (name == "hearing_aids") return hearing_aids();
  throw ArgumentError("unknown array preset '" + std::string(name) + "'");
}

}  // namespace presets

}  // namespace locata::geometry
