// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Azimuth tracking: constant-velocity Kalman filter with wrapped innovations, a Gaussian-mixture
// wrapped Kalman filter, a bootstrap particle filter, and a multi-track lifecycle manager
// (M-of-N initiation, gated Munkres association, time-out termination).
//
// State vector is [azimuth (rad), azimuth rate (rad/s)].

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "locata/assignment.hpp"
#include "locata/error.hpp"
#include "locata/geometry.hpp"
#include "locata/localize.hpp"

namespace locata::track {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using geometry::wrap_angle;
using localize::DoaEstimate;

inline constexpr double kDefaultProcessNoise = 0.25;                  // rad^2/s^3 (0.5 rad/s^1.5 squared)
inline const double kDefaultObsStd = geometry::deg2rad(3.0);          // rad
inline const double kDefaultInitialRateStd = 0.5;                     // rad/s

enum class TrackStatus { Tentative, Confirmed, Terminated };

struct TrackState {
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Identity();
  int track_id = 0;
  double timestamp = 0.0;
  double last_update = 0.0;
  TrackStatus status = TrackStatus::Tentative;
  double elevation = geometry::kPi / 2.0;
  bool flagged = false;  // set when a numerical problem was detected
};

inline Mat2 transition(double dt) {
  Mat2 f;
  f << 1.0, dt, 0.0, 1.0;
  return f;
}

/// White-acceleration process noise for a constant-velocity model.
inline Mat2 process_covariance(double dt, double q) {
  Mat2 m;
  m << dt * dt * dt / 3.0, dt * dt / 2.0, dt * dt / 2.0, dt;
  return q * m;
}

inline bool is_positive_definite(const Mat2& p) {
  if (!p.allFinite()) return false;
  if (std::abs(p(0, 1) - p(1, 0)) > 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff())) return false;
  Eigen::LLT<Mat2> llt(p);
  return llt.info() == Eigen::Success;
}

inline TrackState kf_predict(const TrackState& s, double dt, double process_noise = kDefaultProcessNoise) {
  if (!(dt >= 0.0)) throw ArgumentError("kf_predict: dt must be non-negative");
  if (!(process_noise >= 0.0)) throw ArgumentError("kf_predict: process noise must be non-negative");
  TrackState out = s;
  if (dt == 0.0) return out;
  const Mat2 f = transition(dt);
  out.mean = f * s.mean;
  out.mean(0) = wrap_angle(out.mean(0));
  out.covariance = f * s.covariance * f.transpose() + process_covariance(dt, process_noise);
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  out.timestamp = s.timestamp + dt;
  return out;
}

/// Innovation variance of an azimuth observation.
inline double innovation_variance(const TrackState& s, double obs_noise_var) { return s.covariance(0, 0) + obs_noise_var; }

/// Kalman update with the innovation wrapped to [-pi, pi). Joseph-form covariance.
inline TrackState kf_update(const TrackState& s, double obs, double obs_noise_var) {
  if (!std::isfinite(obs)) throw ArgumentError("kf_update: non-finite observation");
  if (!(obs_noise_var > 0.0)) throw ArgumentError("kf_update: observation variance must be positive");
  if (!is_positive_definite(s.covariance)) throw NumericalError("kf_update: prior covariance is not positive-definite");
  const double innov = wrap_angle(obs - s.mean(0));
  const double sv = innovation_variance(s, obs_noise_var);
  const Vec2 k = s.covariance.col(0) / sv;
  TrackState out = s;
  out.mean = s.mean + k * innov;
  out.mean(0) = wrap_angle(out.mean(0));
  Mat2 ikh = Mat2::Identity();
  ikh.col(0) -= k;
  out.covariance = ikh * s.covariance * ikh.transpose() + obs_noise_var * k * k.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
  if (!is_positive_definite(out.covariance)) {
    out.flagged = true;
    throw NumericalError("kf_update: posterior covariance is not positive-definite");
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// Wrapped Kalman filter

struct MixtureComponent {
  double weight = 1.0;
  Vec2 mean = Vec2::Zero();
  Mat2 covariance = Mat2::Identity();
};

struct WrappedMixture {
  std::vector<MixtureComponent> components;

  static WrappedMixture single(const Vec2& mean, const Mat2& cov) {
    WrappedMixture m;
    m.components.push_back({1.0, Vec2(wrap_angle(mean(0)), mean(1)), cov});
    return m;
  }

  /// Weighted circular mean of the component azimuths.
  double circular_mean() const {
    double sx = 0.0, sy = 0.0;
    for (const auto& c : components) {
      sx += c.weight * std::cos(c.mean(0));
      sy += c.weight * std::sin(c.mean(0));
    }
    return wrap_angle(std::atan2(sy, sx));
  }

  /// Single Gaussian moment-matched around the circular mean.
  TrackState collapse() const {
    if (components.empty()) throw ArgumentError("WrappedMixture: no components");
    const double mu = circular_mean();
    Vec2 mean = Vec2::Zero();
    for (const auto& c : components) {
      mean(0) += c.weight * wrap_angle(c.mean(0) - mu);
      mean(1) += c.weight * c.mean(1);
    }
    Mat2 cov = Mat2::Zero();
    for (const auto& c : components) {
      Vec2 d(wrap_angle(c.mean(0) - mu) - mean(0), c.mean(1) - mean(1));
      cov += c.weight * (c.covariance + d * d.transpose());
    }
    TrackState s;
    s.mean = Vec2(wrap_angle(mu + mean(0)), mean(1));
    s.covariance = 0.5 * (cov + cov.transpose());
    return s;
  }
};

struct MixtureReduction {
  double prune_weight = 1e-4;
  double merge_distance = 0.5;  // Mahalanobis
  std::size_t cap = 8;
};

namespace detail {

inline void normalize_weights(std::vector<MixtureComponent>& comps) {
  double total = 0.0;
  for (const auto& c : comps) total += c.weight;
  if (!(total > 0.0)) throw NumericalError("mixture weights sum to zero");
  for (auto& c : comps) c.weight /= total;
}

inline Vec2 wrapped_difference(const Vec2& a, const Vec2& b) { return Vec2(wrap_angle(a(0) - b(0)), a(1) - b(1)); }

}  // namespace detail

/// Prune light components, merge close ones (moment matching on the circle) and enforce the cap.
inline WrappedMixture reduce_mixture(WrappedMixture mix, const MixtureReduction& red = {}) {
  auto& comps = mix.components;
  if (comps.empty()) return mix;
  std::stable_sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
  // the heaviest component always survives pruning
  comps.erase(std::remove_if(comps.begin() + 1, comps.end(),
                             [&](const MixtureComponent& c) { return c.weight < red.prune_weight; }),
              comps.end());
  detail::normalize_weights(comps);

  std::vector<MixtureComponent> merged;
  std::vector<char> used(comps.size(), 0);
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (used[i]) continue;
    used[i] = 1;
    std::vector<std::size_t> group{i};
    for (std::size_t j = i + 1; j < comps.size(); ++j) {
      if (used[j]) continue;
      const Vec2 d = detail::wrapped_difference(comps[j].mean, comps[i].mean);
      const Mat2 s = comps[i].covariance + comps[j].covariance;
      const double d2 = d.dot(s.ldlt().solve(d));
      if (std::sqrt(std::max(0.0, d2)) < red.merge_distance) {
        used[j] = 1;
        group.push_back(j);
      }
    }
    MixtureComponent m;
    m.weight = 0.0;
    Vec2 offset = Vec2::Zero();
    for (auto g : group) {
      m.weight += comps[g].weight;
      offset += comps[g].weight * detail::wrapped_difference(comps[g].mean, comps[i].mean);
    }
    offset /= m.weight;
    m.mean = comps[i].mean + offset;
    Mat2 cov = Mat2::Zero();
    for (auto g : group) {
      const Vec2 d = detail::wrapped_difference(comps[g].mean, comps[i].mean) - offset;
      cov += comps[g].weight * (comps[g].covariance + d * d.transpose());
    }
    m.covariance = cov / m.weight;
    m.covariance = 0.5 * (m.covariance + m.covariance.transpose());
    m.mean(0) = wrap_angle(m.mean(0));
    merged.push_back(m);
  }
  std::stable_sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
  if (merged.size() > red.cap) merged.resize(red.cap);
  detail::normalize_weights(merged);
  comps = std::move(merged);
  return mix;
}

inline WrappedMixture wrapped_kf_predict(const WrappedMixture& mix, double dt, double process_noise = kDefaultProcessNoise) {
  WrappedMixture out = mix;
  for (auto& c : out.components) {
    TrackState s;
    s.mean = c.mean;
    s.covariance = c.covariance;
    s = kf_predict(s, dt, process_noise);
    c.mean = s.mean;
    c.covariance = s.covariance;
  }
  return out;
}

/// Each component is updated against obs + {-2pi, 0, +2pi}; the hypotheses are weighted by
/// prior weight times innovation likelihood and the mixture is then reduced.
inline WrappedMixture wrapped_kf_update(const WrappedMixture& mix, double obs, double obs_noise_var,
                                        const MixtureReduction& red = {}) {
  if (!std::isfinite(obs)) throw ArgumentError("wrapped_kf_update: non-finite observation");
  if (!(obs_noise_var > 0.0)) throw ArgumentError("wrapped_kf_update: observation variance must be positive");
  if (mix.components.empty()) throw ArgumentError("wrapped_kf_update: empty mixture");
  const double target = wrap_angle(obs);
  std::vector<MixtureComponent> out;
  std::vector<double> logw;
  for (const auto& c : mix.components) {
    if (!is_positive_definite(c.covariance)) throw NumericalError("wrapped_kf_update: component covariance not PD");
    const double sv = c.covariance(0, 0) + obs_noise_var;
    const Vec2 k = c.covariance.col(0) / sv;
    Mat2 ikh = Mat2::Identity();
    ikh.col(0) -= k;
    const Mat2 post = ikh * c.covariance * ikh.transpose() + obs_noise_var * k * k.transpose();
    for (int h = -1; h <= 1; ++h) {
      const double innov = target + h * geometry::kTwoPi - c.mean(0);
      MixtureComponent nc;
      nc.mean = c.mean + k * innov;
      nc.mean(0) = wrap_angle(nc.mean(0));
      nc.covariance = 0.5 * (post + post.transpose());
      out.push_back(nc);
      logw.push_back(std::log(c.weight) - 0.5 * innov * innov / sv - 0.5 * std::log(geometry::kTwoPi * sv));
    }
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].weight = std::exp(logw[i] - mx);
  WrappedMixture m;
  m.components = std::move(out);
  return reduce_mixture(std::move(m), red);
}

// ---------------------------------------------------------------------------------------------
// Particle filter

struct ParticleSet {
  std::vector<Vec2> particles;
  std::vector<double> weights;
  int track_id = 0;
  double last_ess = 0.0;
  bool diverged = false;

  std::size_t size() const noexcept { return particles.size(); }
};

struct PfParams {
  double process_noise = kDefaultProcessNoise;
  double obs_std = kDefaultObsStd;
  double resample_threshold = 0.5;  // fraction of I
};

inline ParticleSet pf_init(const Vec2& mean, const Mat2& cov, std::size_t count, std::mt19937_64& rng) {
  if (count < 1) throw ArgumentError("pf_init: need at least one particle");
  ParticleSet ps;
  ps.particles.resize(count);
  ps.weights.assign(count, 1.0 / static_cast<double>(count));
  Eigen::LLT<Mat2> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("pf_init: covariance not positive-definite");
  const Mat2 l = llt.matrixL();
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& p : ps.particles) {
    const double z0 = n01(rng);
    const double z1 = n01(rng);
    p = mean + l * Vec2(z0, z1);
    p(0) = wrap_angle(p(0));
  }
  ps.last_ess = static_cast<double>(count);
  return ps;
}

/// Constant-velocity propagation with sampled white-acceleration noise (the prior proposal).
inline void pf_propagate(ParticleSet& ps, double dt, double process_noise, std::mt19937_64& rng) {
  if (!(dt >= 0.0)) throw ArgumentError("pf_propagate: dt must be non-negative");
  const Mat2 f = transition(dt);
  const Mat2 q = process_covariance(dt, process_noise);
  const bool noisy = dt > 0.0 && process_noise > 0.0;
  Mat2 l = Mat2::Zero();
  if (noisy) l = q.llt().matrixL();
  std::normal_distribution<double> n01(0.0, 1.0);
  for (auto& p : ps.particles) {
    p = f * p;
    if (noisy) {
      const double z0 = n01(rng);
      const double z1 = n01(rng);
      p += l * Vec2(z0, z1);
    }
    p(0) = wrap_angle(p(0));
  }
}

inline double effective_sample_size(const std::vector<double>& w) {
  double s2 = 0.0;
  for (double x : w) s2 += x * x;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

/// Multiplies weights by the wrapped-Gaussian likelihood of the observation and renormalizes.
/// If every weight underflows, weights are reset to uniform and the set is marked diverged.
inline void pf_weight(ParticleSet& ps, double obs, double obs_std) {
  if (!std::isfinite(obs)) throw ArgumentError("pf_weight: non-finite observation");
  if (!(obs_std > 0.0)) throw ArgumentError("pf_weight: observation std must be positive");
  const double inv2v = 0.5 / (obs_std * obs_std);
  double total = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double d = wrap_angle(obs - ps.particles[i](0));
    double lik = 0.0;
    for (int h = -1; h <= 1; ++h) {
      const double e = d + h * geometry::kTwoPi;
      lik += std::exp(-e * e * inv2v);
    }
    ps.weights[i] *= lik;
    total += ps.weights[i];
  }
  ps.diverged = !(total > 0.0) || !std::isfinite(total);
  if (ps.diverged) {
    std::fill(ps.weights.begin(), ps.weights.end(), 1.0 / static_cast<double>(ps.size()));
  } else {
    for (auto& w : ps.weights) w /= total;
  }
}

inline void systematic_resample(ParticleSet& ps, std::mt19937_64& rng) {
  const std::size_t n = ps.size();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double u0 = u01(rng) / static_cast<double>(n);
  std::vector<Vec2> out(n);
  double cum = ps.weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = u0 + static_cast<double>(i) / static_cast<double>(n);
    while (u > cum && j + 1 < n) cum += ps.weights[++j];
    out[i] = ps.particles[j];
  }
  ps.particles = std::move(out);
  std::fill(ps.weights.begin(), ps.weights.end(), 1.0 / static_cast<double>(n));
}

/// Weighted circular mean of azimuth and arithmetic mean of the rate.
inline Vec2 particle_mean(const ParticleSet& ps) {
  double sx = 0.0, sy = 0.0, rate = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    sx += ps.weights[i] * std::cos(ps.particles[i](0));
    sy += ps.weights[i] * std::sin(ps.particles[i](0));
    rate += ps.weights[i] * ps.particles[i](1);
  }
  return Vec2(wrap_angle(std::atan2(sy, sx)), rate);
}

/// Weighted covariance about the circular mean.
inline Mat2 particle_covariance(const ParticleSet& ps) {
  const Vec2 mu = particle_mean(ps);
  Mat2 c = Mat2::Zero();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Vec2 d(wrap_angle(ps.particles[i](0) - mu(0)), ps.particles[i](1) - mu(1));
    c += ps.weights[i] * d * d.transpose();
  }
  return c;
}

/// Propagate, weight, and resample systematically when ESS < threshold * I.
inline void pf_step(ParticleSet& ps, double obs, double dt, const PfParams& params, std::mt19937_64& rng) {
  pf_propagate(ps, dt, params.process_noise, rng);
  pf_weight(ps, obs, params.obs_std);
  ps.last_ess = effective_sample_size(ps.weights);
  if (ps.last_ess < params.resample_threshold * static_cast<double>(ps.size())) systematic_resample(ps, rng);
}

// ---------------------------------------------------------------------------------------------
// Track lifecycle

enum class FilterKind { Kalman, WrappedKalman, Particle };

inline FilterKind filter_from_name(std::string_view name) {
  if (name == "kalman" || name == "kf") return FilterKind::Kalman;
  if (name == "wrapped" || name == "wrapped-kalman" || name == "wkf") return FilterKind::WrappedKalman;
  if (name == "particle" || name == "pf") return FilterKind::Particle;
  throw ArgumentError("unknown tracker '" + std::string(name) + "'");
}

struct LifecycleConfig {
  FilterKind filter = FilterKind::Kalman;
  std::size_t confirm_hits = 5;    // M
  std::size_t confirm_window = 6;  // N frames
  double gate_sigma = 3.0;
  double max_gate_deg = 30.0;
  double t_miss = 0.5;  // s
  double process_noise = kDefaultProcessNoise;
  double obs_std = kDefaultObsStd;
  double initial_rate_std = kDefaultInitialRateStd;
  std::size_t particles = 2000;
  std::uint64_t seed = 1;
  MixtureReduction reduction;
  /// Emit states from the first observation of a track rather than from confirmation.
  bool emit_from_birth = false;
  /// Additionally emit this many seconds before the emission start, holding the first state.
  double backfill_s = 0.0;
  /// Timestamps at which confirmed tracks report states; empty means the estimate timestamps.
  std::vector<double> clock;

  void validate() const {
    if (confirm_hits < 1 || confirm_window < confirm_hits)
      throw ArgumentError("LifecycleConfig: need 1 <= M <= N for M-of-N initiation");
    if (!(gate_sigma > 0.0) || !(max_gate_deg > 0.0)) throw ArgumentError("LifecycleConfig: gates must be positive");
    if (!(t_miss > 0.0)) throw ArgumentError("LifecycleConfig: t_miss must be positive");
    if (!(obs_std > 0.0) || !(process_noise >= 0.0) || !(initial_rate_std > 0.0))
      throw ArgumentError("LifecycleConfig: noise parameters out of range");
    if (filter == FilterKind::Particle && particles < 1) throw ArgumentError("LifecycleConfig: particles must be >= 1");
    if (backfill_s < 0.0) throw ArgumentError("LifecycleConfig: backfill must be non-negative");
  }
};

struct TrackOutput {
  int track_id = 0;
  std::vector<TrackState> states;
};

/// Per-track filter with a common predict / innovation / update surface.
class TrackFilter {
 public:
  TrackFilter(FilterKind kind, const TrackState& init, const LifecycleConfig& cfg, std::uint64_t seed)
      : kind_(kind), kf_(init), rng_(seed), cfg_(&cfg) {
    if (kind_ == FilterKind::WrappedKalman) mix_ = WrappedMixture::single(init.mean, init.covariance);
    if (kind_ == FilterKind::Particle) ps_ = pf_init(init.mean, init.covariance, cfg.particles, rng_);
  }

  void predict(double dt) {
    const double t0 = kf_.timestamp;
    switch (kind_) {
      case FilterKind::Kalman: kf_ = kf_predict(kf_, dt, cfg_->process_noise); break;
      case FilterKind::WrappedKalman: mix_ = wrapped_kf_predict(mix_, dt, cfg_->process_noise); break;
      case FilterKind::Particle: pf_propagate(ps_, dt, cfg_->process_noise, rng_); break;
    }
    kf_.timestamp = t0 + dt;
  }

  /// Current point estimate and covariance.
  TrackState state() const {
    TrackState s = kf_;
    if (kind_ == FilterKind::WrappedKalman) {
      const auto c = mix_.collapse();
      s.mean = c.mean;
      s.covariance = c.covariance;
    } else if (kind_ == FilterKind::Particle) {
      s.mean = particle_mean(ps_);
      s.covariance = particle_covariance(ps_);
    }
    return s;
  }

  void update(double obs) {
    const double r = cfg_->obs_std * cfg_->obs_std;
    switch (kind_) {
      case FilterKind::Kalman: kf_ = kf_update(kf_, obs, r); break;
      case FilterKind::WrappedKalman: mix_ = wrapped_kf_update(mix_, obs, r, cfg_->reduction); break;
      case FilterKind::Particle:
        pf_weight(ps_, obs, cfg_->obs_std);
        ps_.last_ess = effective_sample_size(ps_.weights);
        if (ps_.last_ess < 0.5 * static_cast<double>(ps_.size())) systematic_resample(ps_, rng_);
        break;
    }
  }

 private:
  FilterKind kind_;
  TrackState kf_;
  WrappedMixture mix_;
  ParticleSet ps_;
  std::mt19937_64 rng_;
  const LifecycleConfig* cfg_;
};

namespace detail {

struct LiveTrack {
  explicit LiveTrack(TrackFilter f) : filter(std::move(f)) {}

  TrackFilter filter;
  int id = 0;  // 0 while tentative
  double birth = 0.0;
  double confirmed_at = 0.0;
  double last_update = 0.0;
  std::size_t frames = 0;
  std::size_t hits = 0;
  double elevation = geometry::kPi / 2.0;
  std::vector<TrackState> history;  // point state after each processed frame
};

inline void record(LiveTrack& t, double time) {
  TrackState s = t.filter.state();
  s.timestamp = time;
  s.last_update = t.last_update;
  s.elevation = t.elevation;
  s.track_id = t.id;
  s.status = t.id > 0 ? TrackStatus::Confirmed : TrackStatus::Tentative;
  t.history.push_back(s);
}

/// States at clock times in [start, end], predicted forward from the latest history entry.
inline TrackOutput emit(const LiveTrack& t, const std::vector<double>& clock, double start, double end,
                        double process_noise, bool terminated) {
  TrackOutput out;
  out.track_id = t.id;
  auto it = std::lower_bound(clock.begin(), clock.end(), start - 1e-9);
  std::size_t h = 0;
  for (; it != clock.end() && *it <= end + 1e-9; ++it) {
    const double tc = *it;
    while (h + 1 < t.history.size() && t.history[h + 1].timestamp <= tc + 1e-9) ++h;
    const TrackState& base = t.history[h];
    // before the first entry (backfill) the first state is held
    TrackState s = tc > base.timestamp ? kf_predict(base, tc - base.timestamp, process_noise) : base;
    s.timestamp = tc;
    s.track_id = t.id;
    s.status = TrackStatus::Confirmed;
    out.states.push_back(s);
  }
  if (terminated && !out.states.empty()) out.states.back().status = TrackStatus::Terminated;
  return out;
}

}  // namespace detail

/// Runs initiation, association, filtering and termination over a time-ordered estimate
/// stream. Track ids are assigned at confirmation, starting at 1, and never reused.
inline std::vector<TrackOutput> track_lifecycle(std::span<const DoaEstimate> estimates, const LifecycleConfig& cfg) {
  cfg.validate();
  for (std::size_t i = 1; i < estimates.size(); ++i)
    if (estimates[i].timestamp < estimates[i - 1].timestamp)
      throw ArgumentError("track_lifecycle: estimates must be time-ordered");

  std::vector<double> frame_times;
  for (const auto& e : estimates)
    if (frame_times.empty() || e.timestamp > frame_times.back()) frame_times.push_back(e.timestamp);
  const std::vector<double>& clock = cfg.clock.empty() ? frame_times : cfg.clock;

  std::vector<detail::LiveTrack> live;
  std::vector<TrackOutput> done;
  int next_id = 1;
  std::uint64_t spawn_count = 0;
  const double r = cfg.obs_std * cfg.obs_std;
  const double max_gate = geometry::deg2rad(cfg.max_gate_deg);

  const auto finish = [&](detail::LiveTrack& t, bool terminated) {
    if (t.id == 0 || t.history.empty()) return;
    const double start = (cfg.emit_from_birth ? t.birth : t.confirmed_at) - cfg.backfill_s;
    const double end = t.last_update + cfg.t_miss;
    auto out = detail::emit(t, clock, start, end, cfg.process_noise, terminated);
    if (!out.states.empty()) done.push_back(std::move(out));
  };

  std::size_t i = 0;
  while (i < estimates.size()) {
    const double t = estimates[i].timestamp;
    std::size_t j = i;
    while (j < estimates.size() && estimates[j].timestamp == t) ++j;
    const auto obs = estimates.subspan(i, j - i);
    i = j;

    // Termination by time-out, and tentatives that can no longer reach M hits.
    for (auto& tr : live) {
      const bool timed_out = t - tr.last_update > cfg.t_miss;
      const bool hopeless = tr.id == 0 && tr.hits + (cfg.confirm_window - std::min(tr.frames, cfg.confirm_window)) < cfg.confirm_hits;
      if (timed_out || hopeless) {
        finish(tr, true);
        tr.frames = std::numeric_limits<std::size_t>::max();  // mark for removal
      }
    }
    std::erase_if(live, [](const auto& tr) { return tr.frames == std::numeric_limits<std::size_t>::max(); });

    for (auto& tr : live) tr.filter.predict(t - tr.filter.state().timestamp);

    std::vector<char> obs_used(obs.size(), 0);
    std::vector<char> track_hit(live.size(), 0);
    for (int stage = 0; stage < 2; ++stage) {
      std::vector<std::size_t> rows;
      for (std::size_t k = 0; k < live.size(); ++k)
        if ((stage == 0) == (live[k].id > 0)) rows.push_back(k);
      std::vector<std::size_t> cols;
      for (std::size_t k = 0; k < obs.size(); ++k)
        if (!obs_used[k]) cols.push_back(k);
      if (rows.empty() || cols.empty()) continue;
      Eigen::MatrixXd cost(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
      Eigen::MatrixXd admissible = Eigen::MatrixXd::Zero(cost.rows(), cost.cols());
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const TrackState s = live[rows[a]].filter.state();
        const double sd = std::sqrt(innovation_variance(s, r));
        const double gate = std::min(cfg.gate_sigma * sd, max_gate);
        for (std::size_t b = 0; b < cols.size(); ++b) {
          const double innov = std::abs(wrap_angle(obs[cols[b]].doa.azimuth() - s.mean(0)));
          const auto ai = static_cast<Eigen::Index>(a), bi = static_cast<Eigen::Index>(b);
          // normalized innovation; inadmissible pairs get the gate + 1 sentinel and are discarded
          if (innov <= gate) {
            admissible(ai, bi) = 1.0;
            cost(ai, bi) = innov / sd;
          } else {
            cost(ai, bi) = cfg.gate_sigma + 1.0;
          }
        }
      }
      const auto asg = solve_assignment(cost);
      for (std::size_t a = 0; a < rows.size(); ++a) {
        const int b = asg.row_to_col[a];
        if (b < 0 || admissible(static_cast<Eigen::Index>(a), b) == 0.0) continue;
        auto& tr = live[rows[a]];
        const auto& e = obs[cols[static_cast<std::size_t>(b)]];
        try {
          tr.filter.update(e.doa.azimuth());
        } catch (const NumericalError&) {
          continue;  // leave the track to coast; it times out if this persists
        }
        tr.last_update = t;
        tr.elevation = e.doa.elevation();
        tr.hits += 1;
        obs_used[cols[static_cast<std::size_t>(b)]] = 1;
        track_hit[rows[a]] = 1;
      }
    }

    for (auto& tr : live) {
      tr.frames += 1;
      if (tr.id == 0 && tr.hits >= cfg.confirm_hits) {
        tr.id = next_id++;
        tr.confirmed_at = t;
      }
      detail::record(tr, t);
    }

    for (std::size_t k = 0; k < obs.size(); ++k) {
      if (obs_used[k]) continue;
      TrackState init;
      init.mean = Vec2(obs[k].doa.azimuth(), 0.0);
      init.covariance << r, 0.0, 0.0, cfg.initial_rate_std * cfg.initial_rate_std;
      init.timestamp = t;
      init.last_update = t;
      detail::LiveTrack tr(TrackFilter(cfg.filter, init, cfg, cfg.seed * 0x9E3779B97F4A7C15ULL + spawn_count++));
      tr.birth = t;
      tr.last_update = t;
      tr.frames = 1;
      tr.hits = 1;
      tr.elevation = obs[k].doa.elevation();
      if (cfg.confirm_hits <= 1) {
        tr.id = next_id++;
        tr.confirmed_at = t;
      }
      detail::record(tr, t);
      live.push_back(std::move(tr));
    }
  }
  for (auto& tr : live) finish(tr, false);

  std::sort(done.begin(), done.end(), [](const auto& a, const auto& b) { return a.track_id < b.track_id; });
  return done;
}

/// Flattens track outputs into estimates sorted by (timestamp, id).
inline std::vector<DoaEstimate> to_estimates(const std::vector<TrackOutput>& tracks) {
  std::vector<DoaEstimate> out;
  for (const auto& tr : tracks)
    for (const auto& s : tr.states) {
      DoaEstimate e;
      e.timestamp = s.timestamp;
      e.doa = geometry::Doa(s.mean(0), s.elevation);
      e.source_id = tr.track_id;
      e.score = 1.0;
      out.push_back(e);
    }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.timestamp < b.timestamp || (a.timestamp == b.timestamp && a.source_id < b.source_id);
  });
  return out;
}

}  // namespace locata::track
