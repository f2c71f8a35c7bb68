// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Frame-level DoA estimation: GCC-PHAT time delays with least-squares triangulation,
// SRP-PHAT grid search, broadband MUSIC, and first-order pseudo-intensity vectors.
//
// Delay convention: tau_{m,l} > 0 when the wavefront reaches microphone l first, i.e.
// channel m is the delayed one. Far-field steering is referenced to the array centroid.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include "locata/error.hpp"
#include "locata/geometry.hpp"
#include "locata/sigproc.hpp"

namespace locata::localize {

using geometry::ArrayGeometry;
using geometry::Doa;
using geometry::Vec3;
using sigproc::Complex;
using sigproc::CrossSpectrum;
using sigproc::FrameBlock;
using sigproc::SpectralFrame;

struct TdoaEstimate {
  std::size_t m = 0;
  std::size_t l = 0;
  double delay = 0.0;  // samples
  double confidence = 0.0;
};

/// A timestamped direction labelled with a source/track id (1-based).
struct DoaEstimate {
  double timestamp = 0.0;
  Doa doa;
  int source_id = 1;
  double score = 0.0;
  bool has_elevation = true;
};

/// Candidate directions for grid searches.
class DoaGrid {
 public:
  DoaGrid(std::vector<Doa> directions, double resolution_deg, bool azimuth_only)
      : directions_(std::move(directions)), resolution_deg_(resolution_deg), azimuth_only_(azimuth_only) {
    if (directions_.empty()) throw ArgumentError("DoaGrid: empty grid");
    units_.reserve(directions_.size());
    for (const auto& d : directions_) units_.push_back(geometry::doa_to_unit_vector(d));
  }

  /// Uniform azimuth ring at a fixed elevation, starting at -pi.
  static DoaGrid azimuth(double resolution_deg = 1.0, double elevation = geometry::kPi / 2.0) {
    if (!(resolution_deg > 0.0)) throw ArgumentError("DoaGrid: resolution must be positive");
    const auto n = static_cast<std::size_t>(std::llround(360.0 / resolution_deg));
    std::vector<Doa> dirs;
    dirs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      dirs.emplace_back(-geometry::kPi + geometry::kTwoPi * static_cast<double>(i) / static_cast<double>(n), elevation);
    return DoaGrid(std::move(dirs), 360.0 / static_cast<double>(n), true);
  }

  /// Geodesic (subdivided icosahedron) grid over the full sphere.
  static DoaGrid sphere(double resolution_deg = 2.0) {
    if (!(resolution_deg > 0.0)) throw ArgumentError("DoaGrid: resolution must be positive");
    const double g = std::numbers::phi;
    const Vec3 v[12] = {{-1, g, 0}, {1, g, 0}, {-1, -g, 0}, {1, -g, 0}, {0, -1, g},  {0, 1, g},
                        {0, -1, -g}, {0, 1, -g}, {g, 0, -1},  {g, 0, 1},   {-g, 0, -1}, {-g, 0, 1}};
    static constexpr int kFaces[20][3] = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                          {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                          {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                          {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    // icosahedron edge subtends ~63.43 degrees
    const int freq = std::max(1, static_cast<int>(std::ceil(63.43494882 / resolution_deg - 1e-9)));
    std::map<std::tuple<long long, long long, long long>, std::size_t> seen;
    std::vector<Doa> dirs;
    for (const auto& f : kFaces) {
      const Vec3 a = v[f[0]], b = v[f[1]], c = v[f[2]];
      for (int i = 0; i <= freq; ++i) {
        for (int j = 0; j <= freq - i; ++j) {
          const Vec3 p = (a + (b - a) * (static_cast<double>(i) / freq) + (c - a) * (static_cast<double>(j) / freq)).normalized();
          const auto key = std::make_tuple(std::llround(p.x() * 1e9), std::llround(p.y() * 1e9), std::llround(p.z() * 1e9));
          if (seen.emplace(key, dirs.size()).second) dirs.push_back(geometry::unit_vector_to_doa(p));
        }
      }
    }
    return DoaGrid(std::move(dirs), 63.43494882 / freq, false);
  }

  /// Azimuth ring at 1 degree for linear/planar apertures, geodesic 2 degree grid for spherical ones.
  static DoaGrid for_geometry(const ArrayGeometry& g) {
    return g.is_spherical() ? sphere(2.0) : azimuth(1.0);
  }

  std::size_t size() const noexcept { return directions_.size(); }
  const std::vector<Doa>& directions() const noexcept { return directions_; }
  const Doa& direction(std::size_t i) const { return directions_.at(i); }
  const std::vector<Vec3>& unit_vectors() const noexcept { return units_; }
  double resolution_deg() const noexcept { return resolution_deg_; }
  bool azimuth_only() const noexcept { return azimuth_only_; }

  /// Grid neighbours of each direction (adjacent ring entries, or within 1.8 x resolution on the sphere).
  const std::vector<std::vector<std::size_t>>& neighbours() const {
    std::call_once(*neighbour_once_, [this] { build_neighbours(); });
    return neighbours_;
  }

  std::size_t nearest(const Doa& d) const {
    const Vec3 u = geometry::doa_to_unit_vector(d);
    std::size_t best = 0;
    double best_dot = -2.0;
    for (std::size_t i = 0; i < units_.size(); ++i) {
      const double dot = units_[i].dot(u);
      if (dot > best_dot) best_dot = dot, best = i;
    }
    return best;
  }

 private:
  void build_neighbours() const {
    const std::size_t n = directions_.size();
    neighbours_.assign(n, {});
    if (azimuth_only_) {
      for (std::size_t i = 0; i < n && n > 1; ++i) {
        neighbours_[i].push_back((i + n - 1) % n);
        if (n > 2) neighbours_[i].push_back((i + 1) % n);
      }
      return;
    }
    const double cos_radius = std::cos(geometry::deg2rad(1.8 * resolution_deg_));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (units_[i].dot(units_[j]) >= cos_radius) {
          neighbours_[i].push_back(j);
          neighbours_[j].push_back(i);
        }
  }

  std::vector<Doa> directions_;
  std::vector<Vec3> units_;
  double resolution_deg_ = 1.0;
  bool azimuth_only_ = true;
  mutable std::vector<std::vector<std::size_t>> neighbours_;
  std::shared_ptr<std::once_flag> neighbour_once_ = std::make_shared<std::once_flag>();
};

using GridPtr = std::shared_ptr<const DoaGrid>;

inline GridPtr share(DoaGrid grid) { return std::make_shared<const DoaGrid>(std::move(grid)); }

enum class SpectrumKind { Srp, Music, PivHistogram };

struct SpatialSpectrum {
  GridPtr grid;
  std::vector<double> values;
  SpectrumKind kind = SpectrumKind::Srp;
};

// ---------------------------------------------------------------------------------------------
// Time differences of arrival

/// tau = (fs / c) (|x_s - x_m| - |x_s - x_l|), in samples.
inline double expected_tdoa(const Vec3& source, const Vec3& mic_m, const Vec3& mic_l, double fs,
                            double c = geometry::kDefaultSpeedOfSound) {
  const double dm = (source - mic_m).norm();
  const double dl = (source - mic_l).norm();
  if (dm <= 1e-9 || dl <= 1e-9) throw DegenerateGeometryError("expected_tdoa: source coincides with a microphone");
  return fs / c * (dm - dl);
}

/// Plane-wave limit of expected_tdoa for a source in direction u (unit vector).
inline double far_field_tdoa(const Vec3& u, const Vec3& mic_m, const Vec3& mic_l, double fs,
                             double c = geometry::kDefaultSpeedOfSound) {
  return fs / c * u.dot(mic_l - mic_m);
}

/// Largest physically possible |tau| for a pair, in samples.
inline double max_physical_tdoa(const Vec3& mic_m, const Vec3& mic_l, double fs,
                                double c = geometry::kDefaultSpeedOfSound) {
  return fs / c * (mic_m - mic_l).norm();
}

struct GccOptions {
  std::size_t interpolation = 1;
  double band_lo_hz = 0.0;
  double band_hi_hz = std::numeric_limits<double>::infinity();
  double phat_floor = 1e-12;  // relative to max |G|
};

/// PHAT weights G/|G| inside the band, zero elsewhere and below the relative floor.
inline Eigen::VectorXcd phat_weights(const Eigen::VectorXcd& g, sigproc::BinRange band, double floor_rel) {
  Eigen::VectorXcd w = Eigen::VectorXcd::Zero(g.size());
  double gmax = 0.0;
  for (std::size_t k = band.lo; k <= band.hi; ++k) gmax = std::max(gmax, std::abs(g(static_cast<Eigen::Index>(k))));
  if (!(gmax > 0.0)) return w;
  const double floor_abs = floor_rel * gmax;
  for (std::size_t k = band.lo; k <= band.hi; ++k) {
    const Complex v = g(static_cast<Eigen::Index>(k));
    const double a = std::abs(v);
    if (a > floor_abs && a > 0.0) w(static_cast<Eigen::Index>(k)) = v / a;
  }
  return w;
}

/// Peak of the PHAT-weighted generalized cross-correlation within +-max_lag samples,
/// refined by a parabola through the discrete peak and its neighbours.
inline TdoaEstimate gcc_phat(const CrossSpectrum& cs, double max_lag, const GccOptions& opt = {}) {
  if (opt.interpolation < 1) throw ArgumentError("gcc_phat: interpolation must be >= 1");
  if (!(max_lag >= 0.0)) throw ArgumentError("gcc_phat: max_lag must be non-negative");
  const std::size_t n = cs.window_length;
  if (n < 2 || cs.bin_count() != n / 2 + 1) throw ArgumentError("gcc_phat: inconsistent cross spectrum");
  if (cs.values.cwiseAbs().maxCoeff() == 0.0) throw NoSignalError("gcc_phat: cross spectrum is all zero");

  const auto band = sigproc::band_bins(opt.band_lo_hz, opt.band_hi_hz, n, cs.sample_rate_hz);
  const Eigen::VectorXcd w = phat_weights(cs.values, band, opt.phat_floor);

  const std::size_t len = n * opt.interpolation;
  std::vector<Complex> spec(len / 2 + 1, Complex(0.0, 0.0));
  double weight_sum = 0.0;
  for (std::size_t k = 0; k < cs.bin_count(); ++k) {
    Complex v = w(static_cast<Eigen::Index>(k));
    if (v == Complex(0.0, 0.0)) continue;
    const bool edge = (k == 0 || k == n / 2);
    if (k == n / 2 && opt.interpolation > 1) v *= 0.5;  // split the Nyquist bin when zero padding
    spec[k] = v;
    weight_sum += edge ? std::abs(v) : 2.0 * std::abs(v);
  }
  if (weight_sum == 0.0) throw NoSignalError("gcc_phat: no usable bins after PHAT weighting");

  sigproc::RealFft fft;
  std::vector<double> r;
  fft.inverse(spec, r, len);
  const double scale = static_cast<double>(len) / weight_sum;

  const auto interp = static_cast<double>(opt.interpolation);
  const auto max_index = std::min<long long>(static_cast<long long>(std::floor(max_lag * interp)),
                                             static_cast<long long>(len / 2) - 1);
  const auto at = [&](long long lag) {
    const auto li = static_cast<long long>(len);
    return r[static_cast<std::size_t>(((lag % li) + li) % li)];
  };
  long long best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (long long lag = -max_index; lag <= max_index; ++lag) {
    const double v = at(lag);
    if (v > best_val) best_val = v, best = lag;
  }
  const double ym = at(best - 1), y0 = best_val, yp = at(best + 1);
  const double denom = ym - 2.0 * y0 + yp;
  double delta = 0.0;
  if (denom < 0.0) delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);

  TdoaEstimate est;
  est.m = cs.m;
  est.l = cs.l;
  est.delay = (static_cast<double>(best) + delta) / interp;
  est.confidence = y0 * scale;
  return est;
}

/// Grid-search least-squares fit of far-field delays on the horizontal plane. Ties go to the
/// smallest azimuth once wrapped to [0, 2pi).
inline Doa tdoa_to_azimuth(std::span<const TdoaEstimate> estimates, const ArrayGeometry& geometry, double fs,
                           double c = geometry::kDefaultSpeedOfSound, double resolution_deg = 1.0) {
  if (estimates.empty()) throw UnderdeterminedError("tdoa_to_azimuth: no delay estimates");
  for (const auto& e : estimates)
    if (e.m >= geometry.mic_count() || e.l >= geometry.mic_count() || e.m == e.l)
      throw ArgumentError("tdoa_to_azimuth: bad microphone pair");
  const auto grid = DoaGrid::azimuth(resolution_deg);
  const auto key = [](double az) { return az < 0.0 ? az + geometry::kTwoPi : az; };
  double best_cost = std::numeric_limits<double>::infinity();
  std::size_t best = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec3& u = grid.unit_vectors()[i];
    double cost = 0.0;
    for (const auto& e : estimates) {
      const double r = e.delay - far_field_tdoa(u, geometry.mic(e.m), geometry.mic(e.l), fs, c);
      cost += r * r;
    }
    const double tol = 1e-12 * (1.0 + std::abs(cost));
    if (i == 0 || cost < best_cost - tol) {
      best_cost = cost;
      best = i;
    } else if (std::abs(cost - best_cost) <= tol &&
               key(grid.direction(i).azimuth()) < key(grid.direction(best).azimuth())) {
      best = i;
    }
  }
  return grid.direction(best);
}

// ---------------------------------------------------------------------------------------------
// Steered response power

struct SrpOptions {
  double band_lo_hz = 300.0;
  double band_hi_hz = 4000.0;
  double speed_of_sound = geometry::kDefaultSpeedOfSound;
  bool include_self_pairs = true;
  /// Direct frequency-domain evaluation for every direction. When false, each pair's GCC is
  /// evaluated on a lag grid of lag_step samples and linearly interpolated, whichever is cheaper.
  bool exact = false;
  double lag_step = 1.0 / 16.0;
  double phat_floor = 1e-12;
};

namespace detail {

inline void check_block(FrameBlock block, const ArrayGeometry& geometry) {
  if (block.empty()) throw ArgumentError("empty frame block");
  const auto m = block.front().channel_count();
  if (m != geometry.mic_count())
    throw ArgumentError("frame block has " + std::to_string(m) + " channels, geometry has " +
                        std::to_string(geometry.mic_count()));
  for (const auto& f : block)
    if (f.channel_count() != m || f.bin_count() != block.front().bin_count())
      throw ArgumentError("inconsistent frames in block");
}

/// sum_k Re{w_k exp(j omega_k tau)} over the band, by phasor recursion.
inline double gcc_value(const Eigen::VectorXcd& w, sigproc::BinRange band, double tau, std::size_t n) {
  const double dw = 2.0 * std::numbers::pi / static_cast<double>(n);
  Complex ph = std::polar(1.0, dw * static_cast<double>(band.lo) * tau);
  const Complex step = std::polar(1.0, dw * tau);
  double acc = 0.0;
  for (std::size_t k = band.lo; k <= band.hi; ++k) {
    const Complex v = w(static_cast<Eigen::Index>(k));
    acc += v.real() * ph.real() - v.imag() * ph.imag();
    ph *= step;
  }
  return acc;
}

}  // namespace detail

/// P(x) = sum_m sum_l R_ml(tau_ml(x)) with PHAT-weighted, block-averaged cross spectra.
inline SpatialSpectrum srp_phat(FrameBlock block, const ArrayGeometry& geometry, GridPtr grid,
                                const SrpOptions& opt = {}) {
  if (!grid || grid->size() == 0) throw ArgumentError("srp_phat: empty grid");
  detail::check_block(block, geometry);
  const std::size_t mics = geometry.mic_count();
  const auto& f0 = block.front();
  const std::size_t n = f0.window_length;
  const double fs = f0.sample_rate_hz;
  const auto band = sigproc::band_bins(opt.band_lo_hz, opt.band_hi_hz, n, fs);
  const auto& units = grid->unit_vectors();
  const std::size_t dirs = grid->size();

  SpatialSpectrum out;
  out.grid = grid;
  out.kind = SpectrumKind::Srp;
  out.values.assign(dirs, 0.0);

  double self_total = 0.0;
  for (std::size_t m = 0; m < mics; ++m) {
    for (std::size_t l = m; l < mics; ++l) {
      const auto cs = sigproc::cross_power_spectrum(block, m, l);
      const Eigen::VectorXcd w = phat_weights(cs.values, band, opt.phat_floor);
      if (m == l) {
        if (opt.include_self_pairs)
          for (std::size_t k = band.lo; k <= band.hi; ++k) self_total += std::abs(w(static_cast<Eigen::Index>(k)));
        continue;
      }
      const Vec3 baseline = geometry.mic(l) - geometry.mic(m);
      const double tau_max = fs / opt.speed_of_sound * baseline.norm();
      const auto lags = static_cast<std::size_t>(std::ceil(2.0 * tau_max / opt.lag_step)) + 3;
      if (opt.exact || lags >= dirs) {
        for (std::size_t d = 0; d < dirs; ++d) {
          const double tau = fs / opt.speed_of_sound * units[d].dot(baseline);
          out.values[d] += 2.0 * detail::gcc_value(w, band, tau, n);
        }
      } else {
        const double lag0 = -tau_max - opt.lag_step;
        std::vector<double> table(lags);
        for (std::size_t j = 0; j < lags; ++j)
          table[j] = detail::gcc_value(w, band, lag0 + static_cast<double>(j) * opt.lag_step, n);
        for (std::size_t d = 0; d < dirs; ++d) {
          const double tau = fs / opt.speed_of_sound * units[d].dot(baseline);
          const double pos = (tau - lag0) / opt.lag_step;
          const auto j = std::min(static_cast<std::size_t>(pos), lags - 2);
          const double frac = pos - static_cast<double>(j);
          out.values[d] += 2.0 * ((1.0 - frac) * table[j] + frac * table[j + 1]);
        }
      }
    }
  }
  for (auto& v : out.values) v += self_total;
  return out;
}

/// Index of the largest value; ties go to the lowest index.
inline std::size_t argmax_index(const SpatialSpectrum& s) {
  if (s.values.empty()) throw ArgumentError("argmax: empty spectrum");
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.values.size(); ++i)
    if (s.values[i] > s.values[best]) best = i;
  return best;
}

inline Doa srp_argmax(const SpatialSpectrum& s) { return s.grid->direction(argmax_index(s)); }

/// Up to count local maxima in decreasing order, at least min_separation_rad apart.
inline std::vector<std::size_t> find_peaks(const SpatialSpectrum& s, std::size_t count,
                                           double min_separation_rad = geometry::deg2rad(10.0)) {
  const auto& nb = s.grid->neighbours();
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    bool peak = true;
    for (auto j : nb[i]) {
      if (s.values[j] > s.values[i] || (s.values[j] == s.values[i] && j < i)) {
        peak = false;
        break;
      }
    }
    if (peak) cand.push_back(i);
  }
  std::stable_sort(cand.begin(), cand.end(), [&](auto a, auto b) { return s.values[a] > s.values[b]; });
  std::vector<std::size_t> out;
  for (auto i : cand) {
    if (out.size() >= count) break;
    bool far = true;
    for (auto j : out)
      if (geometry::angular_distance(s.grid->direction(i), s.grid->direction(j)) < min_separation_rad) far = false;
    if (far) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------
// MUSIC

struct MusicOptions {
  double band_lo_hz = 300.0;
  double band_hi_hz = 4000.0;
  double speed_of_sound = geometry::kDefaultSpeedOfSound;
  double diagonal_loading = 1e-6;  // times trace / M
  double max_condition = 1e12;
};

/// Spatial correlation matrix of one bin over the block, with diagonal loading.
inline Eigen::MatrixXcd spatial_correlation(FrameBlock block, std::size_t bin, double loading) {
  const auto m = static_cast<Eigen::Index>(block.front().channel_count());
  Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(m, m);
  for (const auto& f : block) {
    const Eigen::VectorXcd x = f.bins.col(static_cast<Eigen::Index>(bin));
    r.noalias() += x * x.adjoint();
  }
  r /= static_cast<double>(block.size());
  const double tr = r.trace().real();
  r.diagonal().array() += loading * tr / static_cast<double>(m);
  return r;
}

/// Broadband MUSIC: per-bin pseudo-spectra 1 / (v^H (I - Us Us^H) v), each normalized by its own
/// maximum over the grid, then averaged over the band.
inline SpatialSpectrum music_spectrum(FrameBlock block, const ArrayGeometry& geometry, GridPtr grid,
                                      std::size_t n_sources, const MusicOptions& opt = {}) {
  if (!grid || grid->size() == 0) throw ArgumentError("music_spectrum: empty grid");
  detail::check_block(block, geometry);
  const std::size_t mics = geometry.mic_count();
  if (n_sources < 1 || n_sources >= mics)
    throw ArgumentError("music_spectrum: n_sources must be in [1, channels)");
  if (block.size() < mics)
    throw ArgumentError("music_spectrum: need at least " + std::to_string(mics) + " frames for a full-rank estimate, got " +
                        std::to_string(block.size()));
  const auto& f0 = block.front();
  const std::size_t n = f0.window_length;
  const double fs = f0.sample_rate_hz;
  const auto band = sigproc::band_bins(opt.band_lo_hz, opt.band_hi_hz, n, fs);
  const std::size_t nb = band.size();
  const std::size_t dirs = grid->size();
  const auto mi = static_cast<Eigen::Index>(mics);
  const auto d = static_cast<Eigen::Index>(n_sources);

  // Signal subspace per bin, stored conjugate-transposed.
  std::vector<Eigen::MatrixXcd> us_h(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    const auto r = spatial_correlation(block, band.lo + b, opt.diagonal_loading);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(r);
    if (es.info() != Eigen::Success) throw IllConditionedError("music_spectrum: eigendecomposition failed");
    const auto& ev = es.eigenvalues();
    const double cond = ev(0) > 0.0 ? ev(mi - 1) / ev(0) : std::numeric_limits<double>::infinity();
    if (!(cond <= opt.max_condition))
      throw IllConditionedError("music_spectrum: correlation matrix condition " + std::to_string(cond) +
                                " exceeds limit at bin " + std::to_string(band.lo + b));
    us_h[b] = es.eigenvectors().rightCols(d).adjoint();
  }

  const Vec3 centre = geometry.centroid();
  std::vector<Vec3> rel(mics);
  for (std::size_t m = 0; m < mics; ++m) rel[m] = geometry.mic(m) - centre;
  const double dw = 2.0 * std::numbers::pi / static_cast<double>(n);
  const double mm = static_cast<double>(mics);

  Eigen::MatrixXd p(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(dirs));
  std::vector<Complex> ph(mics), step(mics), proj(n_sources);
  for (std::size_t dir = 0; dir < dirs; ++dir) {
    const Vec3& u = grid->unit_vectors()[dir];
    for (std::size_t m = 0; m < mics; ++m) {
      const double tau = fs / opt.speed_of_sound * u.dot(rel[m]);  // arrival advance, samples
      ph[m] = std::polar(1.0, dw * static_cast<double>(band.lo) * tau);
      step[m] = std::polar(1.0, dw * tau);
    }
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& uh = us_h[b];
      double captured = 0.0;
      for (Eigen::Index s = 0; s < d; ++s) {
        Complex acc(0.0, 0.0);
        for (std::size_t m = 0; m < mics; ++m) acc += uh(s, static_cast<Eigen::Index>(m)) * ph[m];
        captured += std::norm(acc);
      }
      const double denom = std::max(mm - captured, 1e-15 * mm);
      p(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(dir)) = 1.0 / denom;
      for (std::size_t m = 0; m < mics; ++m) ph[m] *= step[m];
    }
  }

  SpatialSpectrum out;
  out.grid = grid;
  out.kind = SpectrumKind::Music;
  out.values.assign(dirs, 0.0);
  for (Eigen::Index b = 0; b < p.rows(); ++b) {
    const double mx = p.row(b).maxCoeff();
    for (std::size_t dir = 0; dir < dirs; ++dir) out.values[dir] += p(b, static_cast<Eigen::Index>(dir)) / mx;
  }
  for (auto& v : out.values) v /= static_cast<double>(nb);
  return out;
}

// ---------------------------------------------------------------------------------------------
// Pseudo-intensity vectors

struct PivOptions {
  double band_lo_hz = 300.0;
  double band_hi_hz = 4000.0;
};

/// Per-frame intensity vector from the order-0 and order-1 (dipole) eigenbeams, using a
/// free-field projection onto real first-order spherical harmonics. The returned vector points
/// along propagation, so the DoA is its negation.
inline Vec3 intensity_vector(const SpectralFrame& frame, const ArrayGeometry& geometry, sigproc::BinRange band,
                             double* diffuseness_ratio = nullptr) {
  const std::size_t mics = geometry.mic_count();
  const Vec3 centre = geometry.centroid();
  std::vector<Vec3> dirs(mics);
  for (std::size_t m = 0; m < mics; ++m) dirs[m] = (geometry.mic(m) - centre).normalized();
  const double w0 = 1.0 / static_cast<double>(mics);
  const double w1 = 3.0 / static_cast<double>(mics);
  Vec3 intensity = Vec3::Zero();
  double magnitude_sum = 0.0;
  for (std::size_t k = band.lo; k <= band.hi; ++k) {
    Complex p0(0.0, 0.0);
    Complex dip[3] = {};
    for (std::size_t m = 0; m < mics; ++m) {
      const Complex s = frame.bins(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
      p0 += w0 * s;
      for (int a = 0; a < 3; ++a) dip[a] += w1 * dirs[m](a) * s;
    }
    // The free-field dipole response carries a factor j; multiplying by j gives a particle-velocity
    // proxy in phase with p0 and oriented along propagation.
    const Complex j(0.0, 1.0);
    double vnorm = 0.0;
    for (int a = 0; a < 3; ++a) {
      const Complex vel = j * dip[a];
      intensity(a) += (std::conj(p0) * vel).real();
      vnorm += std::norm(vel);
    }
    magnitude_sum += std::abs(p0) * std::sqrt(vnorm);
  }
  if (diffuseness_ratio) *diffuseness_ratio = magnitude_sum > 0.0 ? intensity.norm() / magnitude_sum : 0.0;
  return intensity;
}

/// One DoA per frame from the pseudo-intensity vector. Requires a spherical layout.
inline std::vector<DoaEstimate> pseudo_intensity(FrameBlock frames, const ArrayGeometry& geometry,
                                                 const PivOptions& opt = {}) {
  if (!geometry.is_spherical())
    throw UnsupportedGeometryError("pseudo_intensity: geometry '" + geometry.name() + "' is not spherical");
  if (frames.empty()) return {};
  detail::check_block(frames, geometry);
  const auto band = sigproc::band_bins(opt.band_lo_hz, opt.band_hi_hz, frames.front().window_length,
                                       frames.front().sample_rate_hz);
  std::vector<DoaEstimate> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    double ratio = 0.0;
    const Vec3 i = intensity_vector(f, geometry, band, &ratio);
    if (!(i.norm() > 0.0)) throw NoSignalError("pseudo_intensity: silent frame at t=" + std::to_string(f.center_time));
    DoaEstimate e;
    e.timestamp = f.center_time;
    e.doa = geometry::unit_vector_to_doa(-i);
    e.score = ratio;
    out.push_back(e);
  }
  return out;
}

/// Score-weighted histogram of pseudo-intensity DoAs over a grid.
inline SpatialSpectrum piv_histogram(std::span<const DoaEstimate> estimates, GridPtr grid) {
  if (!grid || grid->size() == 0) throw ArgumentError("piv_histogram: empty grid");
  SpatialSpectrum s;
  s.grid = grid;
  s.kind = SpectrumKind::PivHistogram;
  s.values.assign(grid->size(), 0.0);
  for (const auto& e : estimates) s.values[grid->nearest(e.doa)] += e.score;
  return s;
}

}  // namespace locata::localize
