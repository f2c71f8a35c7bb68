// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Free-field scene synthesis: moving point sources, a moving array, 1/r spreading, time-varying
// fractional delays, VAP gating and additive sensor noise. Ground truth is emitted at 120 Hz.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "locata/error.hpp"
#include "locata/geometry.hpp"
#include "locata/sigproc.hpp"
#include "locata/vap.hpp"

namespace locata::simulate {

using geometry::ArrayGeometry;
using geometry::Mat3;
using geometry::Pose;
using geometry::Trajectory;
using geometry::Vec3;

enum class NoiseKind { None, White, Pink };
enum class SignalKind { WhiteNoise, Speech };

inline NoiseKind noise_from_name(std::string_view n) {
  if (n == "none") return NoiseKind::None;
  if (n == "white") return NoiseKind::White;
  if (n == "pink") return NoiseKind::Pink;
  throw ArgumentError("unknown noise kind '" + std::string(n) + "'");
}

inline std::string noise_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::None: return "none";
    case NoiseKind::White: return "white";
    case NoiseKind::Pink: return "pink";
  }
  return "white";
}

struct SourceSpec {
  std::string name;
  SignalKind signal = SignalKind::Speech;
  Trajectory trajectory;
  std::vector<Interval> vaps;  // at the source (emission time)
  /// Received level relative to the noise at the reference mic over VAP samples. When unset,
  /// the emitted signal has rms level_rms.
  std::optional<double> snr_db;
  double level_rms = 1.0;
};

struct SceneConfig {
  int task = 0;  // 0 for hand-built scenes
  double duration = 10.0;
  ArrayGeometry array;
  Trajectory array_trajectory;
  std::vector<SourceSpec> sources;
  NoiseKind noise = NoiseKind::White;
  double noise_rms = 0.01;
  std::uint64_t seed = 0;
  double sample_rate_hz = sigproc::kDefaultSampleRate;
  double speed_of_sound = geometry::kDefaultSpeedOfSound;
  double ramp_s = 0.01;
  double min_distance = 0.1;  // m, near-field guard

  std::size_t sample_count() const { return static_cast<std::size_t>(std::llround(duration * sample_rate_hz)); }

  void validate() const {
    if (!(duration > 0.0)) throw ArgumentError("SceneConfig: duration must be positive");
    if (!(sample_rate_hz > 0.0) || !(speed_of_sound > 0.0)) throw ArgumentError("SceneConfig: bad rates");
    if (array.mic_count() < 2) throw ArgumentError("SceneConfig: array geometry missing");
    if (!(noise_rms >= 0.0)) throw ArgumentError("SceneConfig: noise rms must be non-negative");
    if (!array_trajectory.covers(0.0) || !array_trajectory.covers(duration))
      throw ArgumentError("SceneConfig: array trajectory must cover [0, duration]");
    for (const auto& s : sources) {
      if (!s.trajectory.covers(0.0) || !s.trajectory.covers(duration))
        throw ArgumentError("SceneConfig: trajectory of '" + s.name + "' must cover [0, duration]");
      for (std::size_t a = 0; a < s.vaps.size(); ++a) {
        const auto& v = s.vaps[a];
        if (!(v.end > v.start) || v.start < 0.0 || v.end > duration + 1e-9)
          throw ArgumentError("SceneConfig: VAP of '" + s.name + "' outside [0, duration] or empty");
        if (a > 0 && !(v.start > s.vaps[a - 1].end))
          throw ArgumentError("SceneConfig: VAPs of '" + s.name + "' overlap or are unordered");
      }
      if (s.snr_db && !std::isfinite(*s.snr_db)) throw ArgumentError("SceneConfig: non-finite snr");
      if (s.snr_db && !(noise_rms > 0.0))
        throw ArgumentError("SceneConfig: an SNR target needs a positive noise level");
      if (!(s.level_rms > 0.0)) throw ArgumentError("SceneConfig: level must be positive");
    }
  }
};

struct Scene {
  sigproc::MultichannelAudio audio;
  ArrayGeometry array;
  Trajectory array_trajectory;                   // 120 Hz
  std::vector<std::string> source_names;
  std::vector<Trajectory> source_trajectories;   // 120 Hz
  VapTable vaps;                                 // at the sources
  SceneConfig config;

  /// Ground-truth timestamps.
  std::vector<double> clock() const {
    std::vector<double> t;
    for (const auto& p : array_trajectory.samples()) t.push_back(p.timestamp());
    return t;
  }
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Hann-windowed sinc interpolator, 32 taps, tabulated at 4096 sub-sample phases.
class SincTable {
 public:
  static constexpr int kTaps = 32;
  static constexpr int kHalf = kTaps / 2;
  static constexpr int kPhases = 4096;

  SincTable() : taps_(static_cast<std::size_t>(kPhases + 1) * kTaps) {
    for (int p = 0; p <= kPhases; ++p) {
      const double mu = static_cast<double>(p) / kPhases;
      double sum = 0.0;
      for (int j = 0; j < kTaps; ++j) {
        const double x = mu - static_cast<double>(j - kHalf + 1);  // taps at offsets -15..16
        const double s = std::abs(x) < 1e-12 ? 1.0 : std::sin(geometry::kPi * x) / (geometry::kPi * x);
        const double w = std::abs(x) >= kHalf ? 0.0 : 0.5 + 0.5 * std::cos(geometry::kPi * x / kHalf);
        taps_[static_cast<std::size_t>(p) * kTaps + j] = s * w;
        sum += s * w;
      }
      for (int j = 0; j < kTaps; ++j) taps_[static_cast<std::size_t>(p) * kTaps + j] /= sum;
    }
  }

  /// Value of x at fractional position pos (index into x), zero outside.
  double at(const std::vector<double>& x, double pos) const {
    const double fl = std::floor(pos);
    const auto i0 = static_cast<long long>(fl);
    const int phase = static_cast<int>(std::lround((pos - fl) * kPhases));
    const double* h = &taps_[static_cast<std::size_t>(phase) * kTaps];
    const long long first = i0 - kHalf + 1;
    const auto n = static_cast<long long>(x.size());
    double acc = 0.0;
    if (first >= 0 && first + kTaps <= n) {
      const double* src = x.data() + first;
      for (int j = 0; j < kTaps; ++j) acc += h[j] * src[j];
    } else {
      for (int j = 0; j < kTaps; ++j) {
        const long long k = first + j;
        if (k >= 0 && k < n) acc += h[j] * x[static_cast<std::size_t>(k)];
      }
    }
    return acc;
  }

 private:
  std::vector<double> taps_;
};

inline const SincTable& sinc_table() {
  static const SincTable table;
  return table;
}

/// Second-order section, direct form I.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0, a1 = 0, a2 = 0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  static Biquad lowpass(double fc, double fs, double q = std::numbers::sqrt2 / 2.0) {
    const double w = 2.0 * geometry::kPi * fc / fs, alpha = std::sin(w) / (2.0 * q), c = std::cos(w);
    const double a0 = 1.0 + alpha;
    return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
  }
  static Biquad highpass(double fc, double fs, double q = std::numbers::sqrt2 / 2.0) {
    const double w = 2.0 * geometry::kPi * fc / fs, alpha = std::sin(w) / (2.0 * q), c = std::cos(w);
    const double a0 = 1.0 + alpha;
    return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0, (1.0 - alpha) / a0};
  }
  double operator()(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1, x1 = x, y2 = y1, y1 = y;
    return y;
  }
};

inline void normalize_rms(std::vector<double>& x, double target) {
  double s = 0.0;
  for (double v : x) s += v * v;
  const double r = std::sqrt(s / static_cast<double>(std::max<std::size_t>(1, x.size())));
  if (r > 0.0)
    for (auto& v : x) v *= target / r;
}

/// Band-limited (100-4000 Hz) noise with a slow sinusoidal amplitude modulation.
inline std::vector<double> speech_surrogate(std::size_t n, double fs, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_real_distribution<double> rate(3.0, 6.0), phase(0.0, geometry::kTwoPi);
  auto hp1 = Biquad::highpass(100.0, fs), hp2 = Biquad::highpass(100.0, fs);
  auto lp1 = Biquad::lowpass(4000.0, fs), lp2 = Biquad::lowpass(4000.0, fs);
  const double fm = rate(rng), ph = phase(rng);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = lp2(lp1(hp2(hp1(nd(rng)))));
    const double env = 0.6 + 0.4 * std::sin(geometry::kTwoPi * fm * static_cast<double>(i) / fs + ph);
    x[i] = v * env;
  }
  return x;
}

/// Approximate 1/f noise (Kellet's filter on white Gaussian noise).
inline std::vector<double> pink_noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = nd(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    x[i] = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
  }
  return x;
}

/// 1 inside VAPs, raised-cosine ramps of length ramp inside each period, 0 outside.
inline double vap_envelope(const std::vector<Interval>& vaps, double t, double ramp) {
  for (const auto& v : vaps) {
    if (t < v.start || t > v.end) continue;
    const double r = std::min(ramp, 0.5 * v.duration());
    if (r <= 0.0) return 1.0;
    if (t < v.start + r) return 0.5 - 0.5 * std::cos(geometry::kPi * (t - v.start) / r);
    if (t > v.end - r) return 0.5 - 0.5 * std::cos(geometry::kPi * (v.end - t) / r);
    return 1.0;
  }
  return 0.0;
}

inline Trajectory resample(const Trajectory& tr, const std::vector<double>& times, double rate) {
  std::vector<Pose> s;
  s.reserve(times.size());
  for (double t : times) s.push_back(geometry::interpolate_pose(tr, t));
  return Trajectory(std::move(s), rate);
}

}  // namespace detail

/// Pure function of the config (including its seed).
inline Scene synthesize(const SceneConfig& cfg) {
  cfg.validate();
  const double fs = cfg.sample_rate_hz;
  const double c = cfg.speed_of_sound;
  const std::size_t n = cfg.sample_count();
  const std::size_t mics = cfg.array.mic_count();

  Scene scene;
  scene.config = cfg;
  scene.array = cfg.array;

  // 120 Hz ground-truth clock over [0, duration]
  const double gt_rate = geometry::kDefaultTrajectoryRate;
  std::vector<double> gt;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / gt_rate;
    if (t > cfg.duration + 1e-9) break;
    gt.push_back(t);
  }
  scene.array_trajectory = detail::resample(cfg.array_trajectory, gt, gt_rate);
  for (const auto& s : cfg.sources) {
    scene.source_names.push_back(s.name);
    scene.source_trajectories.push_back(detail::resample(s.trajectory, gt, gt_rate));
    scene.vaps.sources.push_back(s.vaps);
  }

  // Global microphone positions per ground-truth sample.
  std::vector<std::vector<Vec3>> mic_pos(gt.size(), std::vector<Vec3>(mics));
  for (std::size_t k = 0; k < gt.size(); ++k) {
    const auto& pose = scene.array_trajectory.samples()[k];
    for (std::size_t m = 0; m < mics; ++m) mic_pos[k][m] = pose.to_global(cfg.array.mic(m));
  }

  // Reference mic: nearest to the centroid.
  const Vec3 centre = cfg.array.centroid();
  std::size_t ref = 0;
  for (std::size_t m = 1; m < mics; ++m)
    if ((cfg.array.mic(m) - centre).norm() < (cfg.array.mic(ref) - centre).norm()) ref = m;

  scene.audio = sigproc::MultichannelAudio::zeros(mics, n, fs);
  const auto& sinc = detail::sinc_table();

  for (std::size_t si = 0; si < cfg.sources.size(); ++si) {
    const auto& src = cfg.sources[si];
    const auto& traj = scene.source_trajectories[si];

    // distances per gt sample and mic
    std::vector<std::vector<double>> dist(gt.size(), std::vector<double>(mics));
    double max_d = 0.0;
    for (std::size_t k = 0; k < gt.size(); ++k) {
      const Vec3 sp = traj.samples()[k].translation();
      for (std::size_t m = 0; m < mics; ++m) {
        const double d = (sp - mic_pos[k][m]).norm();
        if (d < cfg.min_distance)
          throw ArgumentError("SceneConfig: source '" + src.name + "' passes within " + std::to_string(cfg.min_distance) +
                              " m of microphone " + std::to_string(m) + " at t=" + std::to_string(gt[k]));
        dist[k][m] = d;
        max_d = std::max(max_d, d);
      }
    }

    // emitted signal on an extended index: e[i] is emission sample i - pad
    const auto pad = static_cast<std::size_t>(std::ceil(max_d / c * fs)) + detail::SincTable::kTaps + 2;
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, 100 + si));
    std::vector<double> e;
    if (src.signal == SignalKind::Speech) {
      e = detail::speech_surrogate(n + pad, fs, rng);
    } else {
      std::normal_distribution<double> nd(0.0, 1.0);
      e.resize(n + pad);
      for (auto& v : e) v = nd(rng);
    }
    detail::normalize_rms(e, src.level_rms);
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double t = (static_cast<double>(i) - static_cast<double>(pad)) / fs;
      e[i] *= detail::vap_envelope(src.vaps, t, cfg.ramp_s);
    }

    const auto render = [&](std::size_t m, std::vector<double>& out, double scale) {
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double kf = std::min(t * gt_rate, static_cast<double>(gt.size() - 1));
        const auto k0 = std::min(static_cast<std::size_t>(kf), gt.size() - 1);
        const auto k1 = std::min(k0 + 1, gt.size() - 1);
        const double a = kf - static_cast<double>(k0);
        const double d = (1.0 - a) * dist[k0][m] + a * dist[k1][m];
        const double pos = static_cast<double>(i) + static_cast<double>(pad) - d / c * fs;
        out[i] += scale * sinc.at(e, pos) / std::max(d, cfg.min_distance);
      }
    };

    double scale = 1.0;
    if (src.snr_db) {
      std::vector<double> r(n, 0.0);
      render(ref, r, 1.0);
      double p = 0.0;
      std::size_t cnt = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / fs;
        const double kf = std::min(t * gt_rate, static_cast<double>(gt.size() - 1));
        const double delay = dist[static_cast<std::size_t>(kf)][ref] / c;
        if (detail::vap_envelope(src.vaps, t - delay, 0.0) > 0.0) p += r[i] * r[i], ++cnt;
      }
      if (cnt > 0 && p > 0.0) {
        p /= static_cast<double>(cnt);
        scale = std::sqrt(cfg.noise_rms * cfg.noise_rms * std::pow(10.0, *src.snr_db / 10.0) / p);
      }
    }
    for (std::size_t m = 0; m < mics; ++m) render(m, scene.audio.channels[m], scale);
  }

  // Sensor noise, independent per channel, scaled to the exact configured rms.
  if (cfg.noise != NoiseKind::None && cfg.noise_rms > 0.0) {
    for (std::size_t m = 0; m < mics; ++m) {
      std::mt19937_64 rng(detail::mix_seed(cfg.seed, 10000 + m));
      std::vector<double> w;
      if (cfg.noise == NoiseKind::Pink) {
        w = detail::pink_noise(n, rng);
      } else {
        std::normal_distribution<double> nd(0.0, 1.0);
        w.resize(n);
        for (auto& v : w) v = nd(rng);
      }
      detail::normalize_rms(w, cfg.noise_rms);
      for (std::size_t i = 0; i < n; ++i) scene.audio.channels[m][i] += w[i];
    }
  }

  return scene;
}

// ---------------------------------------------------------------------------------------------
// Task presets

struct PresetOptions {
  std::string array = "robot_head";
  double duration = 10.0;
  double snr_db = 20.0;
  NoiseKind noise = NoiseKind::White;
  double noise_rms = 0.01;
  double max_speed = 1.2;  // m/s
};

namespace detail {

inline std::vector<Interval> random_vaps(double duration, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> first(0.2, 0.6), on(1.5, 3.0), off(0.4, 1.2);
  std::vector<Interval> v;
  double t = first(rng);
  while (t < duration - 0.5) {
    const double end = std::min(t + on(rng), duration - 0.05);
    if (end - t >= 0.3) v.push_back({t, end});
    t = end + off(rng);
  }
  return v;
}

inline Vec3 polar(double az, double r) { return Vec3(r * std::cos(az), r * std::sin(az), 0.0); }

/// Smooth waypoint path: waypoints every segment seconds, cosine easing between them, peak
/// speed kept below max_speed.
inline Trajectory waypoint_path(double az0, double duration, double max_speed, std::mt19937_64& rng,
                                double rate = geometry::kDefaultTrajectoryRate) {
  const double segment = 2.0;
  std::uniform_real_distribution<double> dturn(-geometry::deg2rad(40), geometry::deg2rad(40)), dr(2.0, 3.5);
  std::vector<Vec3> wp = {polar(az0, dr(rng))};
  double az = az0;
  const double max_step = 0.95 * max_speed * segment * 2.0 / geometry::kPi;
  while (static_cast<double>(wp.size() - 1) * segment < duration + segment) {
    az += dturn(rng);
    Vec3 next = polar(az, dr(rng));
    const Vec3 step = next - wp.back();
    if (step.norm() > max_step) next = wp.back() + step * (max_step / step.norm());
    wp.push_back(next);
  }
  std::vector<Pose> s;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / rate;
    if (t > duration + 1e-9) break;
    const auto seg = std::min(static_cast<std::size_t>(t / segment), wp.size() - 2);
    const double u = (t - static_cast<double>(seg) * segment) / segment;
    const double ease = 0.5 - 0.5 * std::cos(geometry::kPi * u);
    s.emplace_back(wp[seg] + (wp[seg + 1] - wp[seg]) * ease, Mat3::Identity(), t);
  }
  return Trajectory(std::move(s), rate);
}

/// Slow translation along x with a sinusoidal head turn about z.
inline Trajectory moving_array_path(double duration, std::mt19937_64& rng, double rate = geometry::kDefaultTrajectoryRate) {
  std::uniform_real_distribution<double> turn_hz(0.1, 0.2), turn_amp(geometry::deg2rad(20), geometry::deg2rad(40)),
      phase(0.0, geometry::kTwoPi);
  const double f = turn_hz(rng), amp = turn_amp(rng), ph = phase(rng);
  std::vector<Pose> s;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / rate;
    if (t > duration + 1e-9) break;
    const Vec3 trans(0.5 * std::sin(geometry::kTwoPi * 0.05 * t), 0.0, 0.0);
    s.emplace_back(trans, geometry::rotation_about_z(amp * std::sin(geometry::kTwoPi * f * t + ph)), t);
  }
  return Trajectory(std::move(s), rate);
}

}  // namespace detail

/// Task 1: one static source, static array. 2: 2-3 static sources. 3: one moving source.
/// 4: two moving sources. 5: one moving source, moving array. 6: two moving sources, moving array.
/// Sources are placed at array height, 2-3.5 m away.
inline SceneConfig task_preset(int task, std::uint64_t seed, const PresetOptions& opt = {}) {
  if (task < 1 || task > 6) throw ArgumentError("task must be in 1..6, got " + std::to_string(task));
  if (!(opt.duration > 0.0)) throw ArgumentError("preset duration must be positive");
  std::mt19937_64 rng(detail::mix_seed(seed, static_cast<std::uint64_t>(task)));
  SceneConfig cfg;
  cfg.task = task;
  cfg.seed = seed;
  cfg.duration = opt.duration;
  cfg.array = geometry::presets::by_name(opt.array);
  cfg.noise = opt.noise;
  cfg.noise_rms = opt.noise_rms;

  const bool moving_sources = task >= 3;
  const bool moving_array = task >= 5;
  std::size_t count = 1;
  if (task == 2) count = std::uniform_int_distribution<std::size_t>(2, 3)(rng);
  if (task == 4 || task == 6) count = 2;

  cfg.array_trajectory = moving_array ? detail::moving_array_path(opt.duration, rng)
                                      : Trajectory::constant(Vec3::Zero(), Mat3::Identity(), 0.0, opt.duration);

  // linear arrays only resolve the front half-plane
  const bool linear = cfg.array.is_linear();
  std::uniform_real_distribution<double> az_any(-geometry::kPi, geometry::kPi), az_front(geometry::deg2rad(30), geometry::deg2rad(150));
  std::uniform_real_distribution<double> dist(2.0, 3.5);
  std::vector<double> azimuths;
  while (azimuths.size() < count) {
    const double az = linear ? az_front(rng) : az_any(rng);
    bool ok = true;
    for (double o : azimuths)
      if (std::abs(geometry::wrap_angle(az - o)) < geometry::deg2rad(40)) ok = false;
    if (ok) azimuths.push_back(az);
  }
  for (std::size_t s = 0; s < count; ++s) {
    SourceSpec src;
    src.name = "source_" + std::to_string(s + 1);
    src.signal = SignalKind::Speech;
    src.snr_db = opt.snr_db;
    if (moving_sources) {
      src.trajectory = detail::waypoint_path(azimuths[s], opt.duration, opt.max_speed, rng);
    } else {
      src.trajectory = Trajectory::constant(detail::polar(azimuths[s], dist(rng)), Mat3::Identity(), 0.0, opt.duration);
    }
    src.vaps = detail::random_vaps(opt.duration, rng);
    cfg.sources.push_back(std::move(src));
  }
  return cfg;
}

}  // namespace locata::simulate
