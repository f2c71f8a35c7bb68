// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Test-side oracles. These deliberately avoid the library's own propagation and framing code:
// delays are applied as a global circular phase shift of the whole signal.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "locata/geometry.hpp"
#include "locata/sigproc.hpp"

namespace testsupport {

inline std::vector<double> white_noise(std::size_t n, std::uint64_t seed, double std = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std);
  std::vector<double> x(n);
  for (auto& v : x) v = nd(rng);
  return x;
}

/// x delayed by d samples (any real d), circularly, by exact DFT phase shift.
inline std::vector<double> circular_delay(const std::vector<double>& x, double d) {
  const std::size_t n = x.size();
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> in(x.begin(), x.end()), spec, out;
  fft.fwd(spec, in);
  for (std::size_t k = 0; k < n; ++k) {
    // signed frequency index so that the shift is the band-limited (sinc) one
    const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    double phase = -2.0 * M_PI * kk * d / static_cast<double>(n);
    if (n % 2 == 0 && k == n / 2) {
      spec[k] *= std::cos(phase);  // keep the Nyquist bin real
      continue;
    }
    spec[k] *= std::polar(1.0, phase);
  }
  fft.inv(out, spec);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = out[i].real();
  return y;
}

inline double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

/// Free-field plane waves at an array: mic m hears each source advanced by
/// fs/c * u . (x_m - centroid) samples.
inline locata::sigproc::MultichannelAudio plane_waves(const locata::geometry::ArrayGeometry& g,
                                                      const std::vector<locata::geometry::Doa>& doas,
                                                      const std::vector<std::vector<double>>& signals,
                                                      double fs = 48000.0, double c = 343.0) {
  locata::sigproc::MultichannelAudio a;
  a.sample_rate_hz = fs;
  const std::size_t n = signals.front().size();
  a.channels.assign(g.mic_count(), std::vector<double>(n, 0.0));
  const auto centre = g.centroid();
  for (std::size_t s = 0; s < doas.size(); ++s) {
    const auto u = locata::geometry::doa_to_unit_vector(doas[s]);
    for (std::size_t m = 0; m < g.mic_count(); ++m) {
      const double advance = fs / c * u.dot(g.mic(m) - centre);
      const auto y = circular_delay(signals[s], -advance);
      for (std::size_t i = 0; i < n; ++i) a.channels[m][i] += y[i];
    }
  }
  return a;
}

inline void add_noise(locata::sigproc::MultichannelAudio& a, double std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std);
  for (auto& ch : a.channels)
    for (auto& v : ch) v += nd(rng);
}

inline double deg(double rad) { return rad * 180.0 / M_PI; }

inline double az_error_deg(double a, double b) { return std::abs(deg(locata::geometry::wrap_angle(a - b))); }

}  // namespace testsupport
