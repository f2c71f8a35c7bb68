// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Localization-and-tracking pipeline: block framing, energy VAD, one localizer, one tracker.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "locata/error.hpp"
#include "locata/geometry.hpp"
#include "locata/localize.hpp"
#include "locata/sigproc.hpp"
#include "locata/track.hpp"

namespace locata::pipeline {

using geometry::ArrayGeometry;
using geometry::Doa;
using localize::DoaEstimate;
using sigproc::MultichannelAudio;
using sigproc::SpectralFrame;

enum class LocalizerKind { GccPhat, Srp, Music, Piv };

inline LocalizerKind localizer_from_name(std::string_view n) {
  if (n == "gcc" || n == "gcc-phat" || n == "gcc_phat") return LocalizerKind::GccPhat;
  if (n == "srp" || n == "srp-phat" || n == "srp_phat") return LocalizerKind::Srp;
  if (n == "music") return LocalizerKind::Music;
  if (n == "piv" || n == "pseudo-intensity" || n == "pseudo_intensity") return LocalizerKind::Piv;
  throw ArgumentError("unknown localizer '" + std::string(n) + "'");
}

inline std::string localizer_name(LocalizerKind k) {
  switch (k) {
    case LocalizerKind::GccPhat: return "gcc-phat";
    case LocalizerKind::Srp: return "srp-phat";
    case LocalizerKind::Music: return "music";
    case LocalizerKind::Piv: return "pseudo-intensity";
  }
  return "?";
}

struct FrontendConfig {
  std::size_t window_length = sigproc::kDefaultWindowLength;
  std::size_t hop = sigproc::kDefaultHop;
  std::size_t block_frames = sigproc::kDefaultAveragingFrames;  // frames per localization
  std::size_t block_hop = 4;                                    // frames between localizations
  double band_lo_hz = 300.0;
  double band_hi_hz = 4000.0;
  bool vad = true;
  double vad_percentile = 0.0;  // noise-floor estimate over all frames; 0 is the quietest frame
  double vad_margin_db = 6.0;
};

struct LocalizerConfig {
  LocalizerKind kind = LocalizerKind::Srp;
  std::size_t n_sources = 1;
  double grid_resolution_deg = 0.0;  // 0: the default grid for the array shape
  bool azimuth_only = false;         // force a horizontal ring grid
  double min_separation_deg = 20.0;
  /// Secondary peaks are kept when their height above the spectrum floor is at least this
  /// fraction of the main peak's.
  double min_peak_ratio = 0.5;
  double diagonal_loading = 1e-6;
};

struct PipelineConfig {
  FrontendConfig frontend;
  LocalizerConfig localizer;
  track::LifecycleConfig tracker;
  double speed_of_sound = geometry::kDefaultSpeedOfSound;

  void validate() const {
    const auto& f = frontend;
    if (f.window_length < 16 || (f.window_length & (f.window_length - 1)) != 0)
      throw ArgumentError("window length must be a power of two >= 16");
    if (f.hop == 0 || f.hop > f.window_length) throw ArgumentError("hop must be in [1, window length]");
    if (f.block_frames == 0 || f.block_hop == 0) throw ArgumentError("block frames and block hop must be >= 1");
    if (!(f.band_lo_hz >= 0.0) || !(f.band_hi_hz > f.band_lo_hz)) throw ArgumentError("band must satisfy 0 <= lo < hi");
    if (!(f.vad_percentile >= 0.0 && f.vad_percentile <= 100.0)) throw ArgumentError("VAD percentile must be in [0, 100]");
    if (!std::isfinite(f.vad_margin_db)) throw ArgumentError("VAD margin must be finite");
    const auto& l = localizer;
    if (l.n_sources < 1) throw ArgumentError("n_sources must be >= 1");
    if (l.grid_resolution_deg < 0.0 || l.grid_resolution_deg > 45.0)
      throw ArgumentError("grid resolution must be in (0, 45] degrees, or 0 for the default");
    if (!(l.min_separation_deg >= 0.0)) throw ArgumentError("peak separation must be non-negative");
    if (!(l.min_peak_ratio >= 0.0 && l.min_peak_ratio <= 1.0)) throw ArgumentError("peak ratio must be in [0, 1]");
    if (!(l.diagonal_loading >= 0.0)) throw ArgumentError("diagonal loading must be non-negative");
    if (!(speed_of_sound > 0.0)) throw ArgumentError("speed of sound must be positive");
    tracker.validate();
  }
};

/// Rejects localizer/array combinations that cannot run, before any audio is touched.
inline void check_supported(const PipelineConfig& cfg, const ArrayGeometry& array) {
  const auto& l = cfg.localizer;
  switch (l.kind) {
    case LocalizerKind::Piv:
      if (!array.is_spherical())
        throw UnsupportedGeometryError("pseudo-intensity needs a spherical array; '" + array.name() + "' is not");
      break;
    case LocalizerKind::Music:
      if (l.n_sources >= array.mic_count())
        throw ArgumentError("music: n_sources must be below the microphone count (" +
                            std::to_string(array.mic_count()) + ")");
      break;
    case LocalizerKind::GccPhat:
      if (l.n_sources > 1) throw ArgumentError("gcc-phat estimates a single source per block");
      break;
    case LocalizerKind::Srp: break;
  }
}

/// Frames per localization block; MUSIC needs at least as many frames as microphones.
inline std::size_t block_length(const PipelineConfig& cfg, const ArrayGeometry& array) {
  std::size_t n = cfg.frontend.block_frames;
  if (cfg.localizer.kind == LocalizerKind::Music) n = std::max(n, array.mic_count());
  return n;
}

inline localize::GridPtr make_grid(const LocalizerConfig& l, const ArrayGeometry& array) {
  const bool ring = l.azimuth_only || l.kind == LocalizerKind::GccPhat || !array.is_spherical();
  if (l.grid_resolution_deg > 0.0)
    return localize::share(ring ? localize::DoaGrid::azimuth(l.grid_resolution_deg)
                                : localize::DoaGrid::sphere(l.grid_resolution_deg));
  return localize::share(ring ? localize::DoaGrid::azimuth(1.0) : localize::DoaGrid::for_geometry(array));
}

struct PipelineOutput {
  std::vector<DoaEstimate> observations;  // per-block localizer output
  std::vector<track::TrackOutput> tracks;
  std::vector<DoaEstimate> estimates;     // track states on the clock
  std::size_t blocks = 0;
  std::size_t active_blocks = 0;
  bool has_elevation = false;
};

namespace detail {

/// Sliding frame cache; frames are computed once as blocks advance.
class FrameWindow {
 public:
  FrameWindow(const MultichannelAudio& audio, std::size_t wl, std::size_t hop) : audio_(&audio), wl_(wl), hop_(hop) {
    total_ = audio.length() >= wl ? (audio.length() - wl) / hop + 1 : 0;
  }

  std::size_t total() const noexcept { return total_; }

  /// Frames [first, first + count), valid until the next call.
  std::span<const SpectralFrame> get(std::size_t first, std::size_t count) {
    if (first < base_ || first + count > total_) throw ArgumentError("FrameWindow: frames requested out of order");
    const std::size_t drop = std::min(first - base_, frames_.size());
    frames_.erase(frames_.begin(), frames_.begin() + static_cast<std::ptrdiff_t>(drop));
    base_ = first;
    const std::size_t have = base_ + frames_.size();
    if (have < first + count) {
      const std::size_t k0 = have, k1 = first + count;  // frames to add
      MultichannelAudio slice;
      slice.sample_rate_hz = audio_->sample_rate_hz;
      slice.start_time = audio_->start_time + static_cast<double>(k0 * hop_) / audio_->sample_rate_hz;
      const std::size_t s0 = k0 * hop_, s1 = (k1 - 1) * hop_ + wl_;
      for (const auto& ch : audio_->channels)
        slice.channels.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(s0), ch.begin() + static_cast<std::ptrdiff_t>(s1));
      auto fresh = sigproc::frame_signal(slice, wl_, hop_);
      for (auto& f : fresh) frames_.push_back(std::move(f));
    }
    return std::span<const SpectralFrame>(frames_.data(), count);
  }

 private:
  const MultichannelAudio* audio_;
  std::size_t wl_, hop_, total_ = 0, base_ = 0;
  std::vector<SpectralFrame> frames_;
};

/// Linear-interpolated percentile of the positive values (digital silence is ignored).
inline double percentile(std::vector<double> v, double pct) {
  std::erase_if(v, [](double x) { return !(x > 0.0); });
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = pct / 100.0 * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  const double f = pos - static_cast<double>(i);
  return i + 1 < v.size() ? (1.0 - f) * v[i] + f * v[i + 1] : v[i];
}

/// Peaks of a spatial spectrum, dropping secondary peaks that are weak relative to the first.
inline std::vector<Doa> spectrum_peaks(const localize::SpatialSpectrum& s, const LocalizerConfig& l) {
  const auto idx = localize::find_peaks(s, l.n_sources, geometry::deg2rad(l.min_separation_deg));
  std::vector<Doa> out;
  if (idx.empty()) return out;
  const double floor = *std::min_element(s.values.begin(), s.values.end());
  const double top = s.values[idx.front()] - floor;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i > 0 && s.values[idx[i]] - floor < l.min_peak_ratio * top) break;
    out.push_back(s.grid->direction(idx[i]));
  }
  return out;
}

/// Score-weighted mean direction of the per-frame estimates within radius of each histogram peak.
inline std::vector<Doa> piv_peaks(std::span<const DoaEstimate> frames, const localize::GridPtr& grid,
                                  const LocalizerConfig& l) {
  const auto hist = localize::piv_histogram(frames, grid);
  const auto seeds = spectrum_peaks(hist, l);
  const double cos_radius = std::cos(geometry::deg2rad(std::max(l.min_separation_deg / 2.0, 3.0 * grid->resolution_deg())));
  std::vector<Doa> out;
  for (const auto& seed : seeds) {
    const geometry::Vec3 u0 = geometry::doa_to_unit_vector(seed);
    geometry::Vec3 acc = geometry::Vec3::Zero();
    for (const auto& e : frames) {
      const geometry::Vec3 u = geometry::doa_to_unit_vector(e.doa);
      if (u.dot(u0) >= cos_radius) acc += e.score * u;
    }
    out.push_back(acc.norm() > 0.0 ? geometry::unit_vector_to_doa(acc) : seed);
  }
  return out;
}

}  // namespace detail

/// Runs frontend, localizer and tracker over a recording. Track states are reported at the clock
/// timestamps (or at the block timestamps when the clock is empty).
inline PipelineOutput run(const MultichannelAudio& audio, const ArrayGeometry& array, const std::vector<double>& clock,
                          const PipelineConfig& cfg) {
  cfg.validate();
  check_supported(cfg, array);
  audio.validate();
  if (audio.channel_count() != array.mic_count())
    throw ArgumentError("audio has " + std::to_string(audio.channel_count()) + " channels, array '" + array.name() +
                        "' has " + std::to_string(array.mic_count()));
  const auto& fe = cfg.frontend;
  const auto& lc = cfg.localizer;
  const double fs = audio.sample_rate_hz;
  const auto band = sigproc::band_bins(fe.band_lo_hz, fe.band_hi_hz, fe.window_length, fs);
  const std::size_t nb = block_length(cfg, array);
  const auto grid = make_grid(lc, array);

  PipelineOutput out;
  out.has_elevation = !grid->azimuth_only();
  detail::FrameWindow window(audio, fe.window_length, fe.hop);
  if (window.total() < nb) return out;
  const std::size_t blocks = (window.total() - nb) / fe.block_hop + 1;
  out.blocks = blocks;

  // First pass: frame powers. A block is active when at least half of its frames exceed the
  // noise floor by the margin.
  std::vector<double> frame_power(window.total(), 0.0);
  for (std::size_t k = 0; k < window.total(); ++k) frame_power[k] = sigproc::frame_power(window.get(k, 1).front(), band);
  double threshold = -1.0;
  if (fe.vad) threshold = detail::percentile(frame_power, fe.vad_percentile) * std::pow(10.0, fe.vad_margin_db / 10.0);
  std::vector<double> power(blocks, 0.0);
  std::vector<bool> active(blocks, false);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::size_t loud = 0;
    for (std::size_t k = b * fe.block_hop; k < b * fe.block_hop + nb; ++k) {
      power[b] += frame_power[k];
      if (frame_power[k] > threshold) ++loud;
    }
    power[b] /= static_cast<double>(nb);
    active[b] = 2 * loud >= nb && power[b] > 0.0;
  }

  localize::SrpOptions srp;
  srp.band_lo_hz = fe.band_lo_hz;
  srp.band_hi_hz = fe.band_hi_hz;
  srp.speed_of_sound = cfg.speed_of_sound;
  localize::MusicOptions music;
  music.band_lo_hz = fe.band_lo_hz;
  music.band_hi_hz = fe.band_hi_hz;
  music.speed_of_sound = cfg.speed_of_sound;
  music.diagonal_loading = lc.diagonal_loading;
  localize::PivOptions piv;
  piv.band_lo_hz = fe.band_lo_hz;
  piv.band_hi_hz = fe.band_hi_hz;
  localize::GccOptions gcc;
  gcc.band_lo_hz = fe.band_lo_hz;
  gcc.band_hi_hz = fe.band_hi_hz;
  gcc.interpolation = 4;

  detail::FrameWindow frames(audio, fe.window_length, fe.hop);
  for (std::size_t b = 0; b < blocks; ++b) {
    if (!active[b]) continue;
    ++out.active_blocks;
    const auto blk = frames.get(b * fe.block_hop, nb);
    double t = 0.0;
    for (const auto& f : blk) t += f.center_time;
    t /= static_cast<double>(nb);

    std::vector<Doa> doas;
    switch (lc.kind) {
      case LocalizerKind::Srp: doas = detail::spectrum_peaks(localize::srp_phat(blk, array, grid, srp), lc); break;
      case LocalizerKind::Music:
        doas = detail::spectrum_peaks(localize::music_spectrum(blk, array, grid, lc.n_sources, music), lc);
        break;
      case LocalizerKind::Piv: doas = detail::piv_peaks(localize::pseudo_intensity(blk, array, piv), grid, lc); break;
      case LocalizerKind::GccPhat: {
        std::vector<localize::TdoaEstimate> tdoas;
        for (std::size_t m = 0; m < array.mic_count(); ++m)
          for (std::size_t l = m + 1; l < array.mic_count(); ++l) {
            const double max_lag = localize::max_physical_tdoa(array.mic(m), array.mic(l), fs, cfg.speed_of_sound);
            tdoas.push_back(localize::gcc_phat(sigproc::cross_power_spectrum(blk, m, l), max_lag, gcc));
          }
        doas.push_back(localize::tdoa_to_azimuth(tdoas, array, fs, cfg.speed_of_sound, grid->resolution_deg()));
        break;
      }
    }
    for (const auto& d : doas) {
      DoaEstimate e;
      e.timestamp = t;
      e.doa = d;
      e.score = power[b];
      e.has_elevation = out.has_elevation;
      out.observations.push_back(e);
    }
  }

  track::LifecycleConfig tc = cfg.tracker;
  tc.clock = clock;
  out.tracks = track::track_lifecycle(out.observations, tc);
  out.estimates = track::to_estimates(out.tracks);
  for (auto& e : out.estimates) e.has_elevation = out.has_elevation;
  return out;
}

}  // namespace locata::pipeline
