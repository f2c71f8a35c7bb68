// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Multichannel buffers, STFT framing and cross-power spectra.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "locata/error.hpp"

namespace locata::sigproc {

using Complex = std::complex<double>;

inline constexpr double kDefaultSampleRate = 48000.0;
inline constexpr std::size_t kDefaultWindowLength = 2048;
inline constexpr std::size_t kDefaultHop = 1024;
inline constexpr std::size_t kDefaultAveragingFrames = 8;

/// Channel-major real samples.
struct MultichannelAudio {
  std::vector<std::vector<double>> channels;
  double sample_rate_hz = kDefaultSampleRate;
  double start_time = 0.0;

  std::size_t channel_count() const noexcept { return channels.size(); }
  std::size_t length() const noexcept { return channels.empty() ? 0 : channels.front().size(); }
  double duration() const noexcept { return static_cast<double>(length()) / sample_rate_hz; }

  void validate() const {
    if (!(sample_rate_hz > 0.0)) throw ArgumentError("MultichannelAudio: sample rate must be positive");
    for (const auto& ch : channels)
      if (ch.size() != length()) throw ArgumentError("MultichannelAudio: channels differ in length");
  }

  static MultichannelAudio zeros(std::size_t channels, std::size_t length, double fs = kDefaultSampleRate) {
    MultichannelAudio a;
    a.channels.assign(channels, std::vector<double>(length, 0.0));
    a.sample_rate_hz = fs;
    return a;
  }
};

enum class Window { Rectangular, Hann };

inline Window window_from_name(std::string_view name) {
  if (name == "rect" || name == "rectangular") return Window::Rectangular;
  if (name == "hann") return Window::Hann;
  throw ArgumentError("unknown window '" + std::string(name) + "'");
}

/// Periodic taper of the given length.
inline std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::Hann) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return out;
}

/// Thin wrapper over Eigen's FFT for one-sided real transforms.
class RealFft {
 public:
  RealFft() { fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum); }

  /// n real samples -> n/2 + 1 bins.
  void forward(const std::vector<double>& in, std::vector<Complex>& out) { fft_.fwd(out, in); }

  /// n/2 + 1 bins -> n real samples, scaled by 1/n.
  void inverse(const std::vector<Complex>& in, std::vector<double>& out, std::size_t n) {
    fft_.inv(out, in, static_cast<int>(n));
  }

 private:
  Eigen::FFT<double> fft_;
};

/// One STFT frame: rows are channels, columns one-sided bins.
struct SpectralFrame {
  Eigen::MatrixXcd bins;
  double center_time = 0.0;
  std::size_t window_length = 0;
  std::size_t hop = 0;
  double sample_rate_hz = kDefaultSampleRate;

  std::size_t bin_count() const noexcept { return static_cast<std::size_t>(bins.cols()); }
  std::size_t channel_count() const noexcept { return static_cast<std::size_t>(bins.rows()); }
  /// Normalized angular frequency of bin k, rad/sample.
  double omega(std::size_t k) const {
    return 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(window_length);
  }
  double bin_hz(std::size_t k) const {
    return static_cast<double>(k) * sample_rate_hz / static_cast<double>(window_length);
  }
};

using FrameBlock = std::span<const SpectralFrame>;

/// Frame k covers samples [k*hop, k*hop + window_length). A window longer than the signal
/// yields no frames.
inline std::vector<SpectralFrame> frame_signal(const MultichannelAudio& audio,
                                               std::size_t window_length = kDefaultWindowLength,
                                               std::size_t hop = kDefaultHop, Window window = Window::Hann) {
  audio.validate();
  if (hop == 0) throw ArgumentError("frame_signal: hop must be >= 1");
  if (window_length == 0) throw ArgumentError("frame_signal: window length must be >= 1");
  std::vector<SpectralFrame> frames;
  const std::size_t len = audio.length();
  if (window_length > len || audio.channel_count() == 0) return frames;

  const std::size_t count = (len - window_length) / hop + 1;
  const std::size_t nbins = window_length / 2 + 1;
  const auto taper = make_window(window, window_length);
  RealFft fft;
  std::vector<double> buf(window_length);
  std::vector<Complex> spec;
  frames.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    SpectralFrame f;
    f.bins.resize(static_cast<Eigen::Index>(audio.channel_count()), static_cast<Eigen::Index>(nbins));
    f.window_length = window_length;
    f.hop = hop;
    f.sample_rate_hz = audio.sample_rate_hz;
    f.center_time = audio.start_time +
                    (static_cast<double>(k * hop) + static_cast<double>(window_length) / 2.0) / audio.sample_rate_hz;
    for (std::size_t c = 0; c < audio.channel_count(); ++c) {
      const double* src = audio.channels[c].data() + k * hop;
      for (std::size_t i = 0; i < window_length; ++i) buf[i] = src[i] * taper[i];
      fft.forward(buf, spec);
      for (std::size_t b = 0; b < nbins; ++b) f.bins(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(b)) = spec[b];
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

/// Block-averaged S_m conj(S_l) for one channel pair.
struct CrossSpectrum {
  std::size_t m = 0;
  std::size_t l = 0;
  Eigen::VectorXcd values;
  std::size_t window_length = 0;
  double sample_rate_hz = kDefaultSampleRate;

  std::size_t bin_count() const noexcept { return static_cast<std::size_t>(values.size()); }
};

/// Averages over the first averaging_frames frames of the block.
inline CrossSpectrum cross_power_spectrum(FrameBlock block, std::size_t m, std::size_t l,
                                          std::size_t averaging_frames) {
  if (averaging_frames == 0) throw ArgumentError("cross_power_spectrum: averaging_frames must be >= 1");
  if (block.size() < averaging_frames)
    throw ArgumentError("cross_power_spectrum: block has " + std::to_string(block.size()) + " frames, need " +
                        std::to_string(averaging_frames));
  const auto& first = block.front();
  if (m >= first.channel_count() || l >= first.channel_count())
    throw ArgumentError("cross_power_spectrum: channel index out of range");
  CrossSpectrum cs;
  cs.m = m;
  cs.l = l;
  cs.window_length = first.window_length;
  cs.sample_rate_hz = first.sample_rate_hz;
  cs.values = Eigen::VectorXcd::Zero(first.bins.cols());
  for (std::size_t f = 0; f < averaging_frames; ++f) {
    const auto& fr = block[f];
    cs.values += (fr.bins.row(static_cast<Eigen::Index>(m)).array() *
                  fr.bins.row(static_cast<Eigen::Index>(l)).array().conjugate())
                     .matrix()
                     .transpose();
  }
  cs.values /= static_cast<double>(averaging_frames);
  return cs;
}

inline CrossSpectrum cross_power_spectrum(FrameBlock block, std::size_t m, std::size_t l) {
  return cross_power_spectrum(block, m, l, block.size());
}

/// Inclusive bin range [lo, hi] for a frequency band.
struct BinRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t size() const noexcept { return hi >= lo ? hi - lo + 1 : 0; }
};

inline BinRange band_bins(double lo_hz, double hi_hz, std::size_t window_length, double fs) {
  const std::size_t nbins = window_length / 2 + 1;
  const double df = fs / static_cast<double>(window_length);
  BinRange r;
  r.lo = static_cast<std::size_t>(std::ceil(std::max(0.0, lo_hz) / df - 1e-9));
  const double hi = std::min(hi_hz, fs / 2.0);
  r.hi = std::min(nbins - 1, static_cast<std::size_t>(std::floor(hi / df + 1e-9)));
  if (r.lo > r.hi) throw ArgumentError("band contains no frequency bins");
  return r;
}

/// Mean per-frame power over all channels and the given bins.
inline double frame_power(const SpectralFrame& f, BinRange bins) {
  double p = 0.0;
  for (Eigen::Index c = 0; c < f.bins.rows(); ++c)
    for (std::size_t k = bins.lo; k <= bins.hi; ++k) p += std::norm(f.bins(c, static_cast<Eigen::Index>(k)));
  return p / static_cast<double>(f.bins.rows() * static_cast<Eigen::Index>(bins.size()));
}

}  // namespace locata::sigproc
