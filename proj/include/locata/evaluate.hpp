// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Evaluation harness: VAP alignment, gating, association, per-recording measures and OSPA.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "locata/assignment.hpp"
#include "locata/error.hpp"
#include "locata/geometry.hpp"
#include "locata/localize.hpp"
#include "locata/vap.hpp"

namespace locata::evaluate {

using geometry::Doa;
using geometry::Trajectory;
using geometry::Vec3;
using geometry::deg2rad;
using geometry::kDefaultSpeedOfSound;
using geometry::rad2deg;
using geometry::wrap_angle;
using localize::DoaEstimate;

inline constexpr double kDefaultGateDeg = 30.0;
inline constexpr double kDefaultOspaCutoffDeg = 30.0;
inline constexpr double kClockTolerance = 1e-6;

struct AngularError {
  double azimuth = 0.0;    // rad, in [-pi, pi)
  double elevation = 0.0;  // rad, unwrapped
};

inline AngularError angular_errors(const Doa& truth, const Doa& est) {
  return {wrap_angle(truth.azimuth() - est.azimuth()), truth.elevation() - est.elevation()};
}

/// Shifts each VAP boundary by the source-to-array propagation time at that boundary.
/// local_centroid is the array centroid in the array's local frame.
inline VapTable align_vaps(const VapTable& source_vaps, std::span<const Trajectory> sources, const Trajectory& array,
                           double c = kDefaultSpeedOfSound, const Vec3& local_centroid = Vec3::Zero()) {
  if (!(c > 0.0)) throw ArgumentError("align_vaps: speed of sound must be positive");
  if (sources.size() != source_vaps.source_count())
    throw ArgumentError("align_vaps: one trajectory per source is required");
  auto delay = [&](std::size_t n, double t) {
    if (!sources[n].covers(t) || !array.covers(t))
      throw OutOfRangeError("align_vaps: no positional data at t = " + std::to_string(t));
    const Vec3 src = interpolate_position(sources[n], t);
    const Vec3 mic = interpolate_pose(array, t).to_global(local_centroid);
    return (src - mic).norm() / c;
  };
  VapTable out;
  out.sources.resize(source_vaps.source_count());
  for (std::size_t n = 0; n < source_vaps.source_count(); ++n)
    for (const auto& p : source_vaps.sources[n])
      out.sources[n].push_back({p.start + delay(n, p.start), p.end + delay(n, p.end)});
  return out;
}

/// Reference data for one recording, sampled on the evaluation clock.
struct GroundTruth {
  std::vector<double> clock;
  std::vector<std::string> source_names;
  std::vector<std::vector<Doa>> doas;  // [source][clock index], array-local frame
  VapTable vaps;                       // aligned at the array
  double duration = 0.0;

  std::size_t source_count() const noexcept { return doas.size(); }
};

/// Builds ground truth from positional data. Clock samples are those of the array trajectory.
inline GroundTruth make_ground_truth(std::span<const Trajectory> sources, std::vector<std::string> names,
                                     const VapTable& source_vaps, const Trajectory& array,
                                     double c = kDefaultSpeedOfSound, bool align = true,
                                     const Vec3& local_centroid = Vec3::Zero()) {
  if (array.empty()) throw ArgumentError("make_ground_truth: empty array trajectory");
  if (names.size() != sources.size()) throw ArgumentError("make_ground_truth: one name per source is required");
  GroundTruth gt;
  gt.source_names = std::move(names);
  for (const auto& p : array.samples()) gt.clock.push_back(p.timestamp());
  gt.doas.resize(sources.size());
  for (std::size_t n = 0; n < sources.size(); ++n) {
    gt.doas[n].reserve(gt.clock.size());
    for (std::size_t i = 0; i < gt.clock.size(); ++i) {
      const double t = gt.clock[i];
      const Vec3 s = sources[n].covers(t) ? interpolate_position(sources[n], t)
                                          : (t < sources[n].start_time() ? sources[n].samples().front()
                                                                          : sources[n].samples().back())
                                                .translation();
      gt.doas[n].push_back(global_to_local(s, array.samples()[i]));
    }
  }
  gt.vaps = align ? align_vaps(source_vaps, sources, array, c, local_centroid) : source_vaps;
  // each clock sample stands for one sample period
  if (gt.clock.size() > 1)
    gt.duration = (gt.clock.back() - gt.clock.front()) * static_cast<double>(gt.clock.size()) /
                  static_cast<double>(gt.clock.size() - 1);
  return gt;
}

/// One valid source-to-estimate pair at a timestamp.
struct AssociatedPair {
  std::size_t source = 0;    // 0-based source index
  std::size_t estimate = 0;  // index into the estimate slice
  int track_id = 0;
  AngularError error;
  bool has_elevation = true;
};

struct AssociationSlice {
  double timestamp = 0.0;
  std::vector<AssociatedPair> pairs;
  std::vector<std::size_t> false_estimates;
  std::vector<std::size_t> missed_sources;
  std::size_t active_sources = 0;

  std::optional<int> track_for(std::size_t source) const {
    for (const auto& p : pairs)
      if (p.source == source) return p.track_id;
    return std::nullopt;
  }
};

struct ActiveSource {
  std::size_t source = 0;
  Doa doa;
};

/// Gated Munkres association on absolute azimuth error in degrees.
inline AssociationSlice gate_and_associate(std::span<const ActiveSource> truth, std::span<const DoaEstimate> est,
                                           double gate_deg = kDefaultGateDeg) {
  if (!(gate_deg > 0.0)) throw ArgumentError("gate_and_associate: gate must be positive");
  AssociationSlice out;
  out.timestamp = est.empty() ? 0.0 : est.front().timestamp;
  out.active_sources = truth.size();
  const auto rows = static_cast<Eigen::Index>(truth.size());
  const auto cols = static_cast<Eigen::Index>(est.size());
  std::vector<int> row_to_col(truth.size(), -1);
  if (rows > 0 && cols > 0) {
    const double sentinel = gate_deg + 1.0;
    Eigen::MatrixXd cost(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double d =
            std::abs(rad2deg(angular_errors(truth[static_cast<std::size_t>(i)].doa, est[static_cast<std::size_t>(j)].doa)
                                 .azimuth));
        cost(i, j) = d > gate_deg ? sentinel : d;
      }
    const auto a = solve_assignment(cost);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const int j = a.row_to_col[static_cast<std::size_t>(i)];
      if (j >= 0 && cost(i, j) <= gate_deg) row_to_col[static_cast<std::size_t>(i)] = j;
    }
  }
  std::vector<char> used(est.size(), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int j = row_to_col[i];
    if (j < 0) {
      out.missed_sources.push_back(truth[i].source);
      continue;
    }
    const auto& e = est[static_cast<std::size_t>(j)];
    used[static_cast<std::size_t>(j)] = 1;
    out.pairs.push_back({truth[i].source, static_cast<std::size_t>(j), e.source_id, angular_errors(truth[i].doa, e.doa),
                         e.has_elevation});
  }
  for (std::size_t j = 0; j < est.size(); ++j)
    if (!used[j]) out.false_estimates.push_back(j);
  return out;
}

struct FragmentationCounts {
  std::vector<std::size_t> breaks;  // per timestamp
  std::vector<std::size_t> swaps;   // per timestamp
  std::size_t total_breaks = 0;
  std::size_t total_swaps = 0;
};

/// Breaks and ID swaps; both timestamps of an event must lie inside one VAP of the source.
inline FragmentationCounts detect_fragmentation(std::span<const AssociationSlice> assoc, const VapTable& vaps) {
  FragmentationCounts f;
  f.breaks.assign(assoc.size(), 0);
  f.swaps.assign(assoc.size(), 0);
  for (std::size_t k = 1; k < assoc.size(); ++k) {
    const double t0 = assoc[k - 1].timestamp, t1 = assoc[k].timestamp;
    for (std::size_t n = 0; n < vaps.source_count(); ++n) {
      const auto a0 = vaps.period_index(n, t0), a1 = vaps.period_index(n, t1);
      if (!a0 || !a1 || *a0 != *a1) continue;
      const auto prev = assoc[k - 1].track_for(n);
      if (!prev) continue;
      const auto cur = assoc[k].track_for(n);
      if (!cur)
        ++f.breaks[k];
      else if (*cur != *prev)
        ++f.swaps[k];
    }
    f.total_breaks += f.breaks[k];
    f.total_swaps += f.swaps[k];
  }
  return f;
}

/// Per-(source, VAP) detection record.
struct VapRecord {
  std::size_t source = 0;
  std::size_t period = 0;
  Interval interval;
  std::size_t timestamps = 0;  // clock samples inside the VAP
  std::size_t valid = 0;       // L_valid
  std::optional<double> latency;
  std::optional<double> mean_abs_az_error_deg;  // over valid pairs in this VAP
};

struct OspaSummary {
  double order = 1.0;
  double cutoff_deg = kDefaultOspaCutoffDeg;
  std::vector<double> series;  // degrees, one per clock sample
  double mean = 0.0;
  double stddev = 0.0;
};

/// Undefined measures are left empty rather than reported as zero.
struct MetricsReport {
  std::size_t timestamps = 0;
  std::size_t valid_pairs = 0;
  std::size_t false_estimates = 0;
  std::size_t false_in_vap = 0;
  std::size_t missed = 0;
  std::size_t breaks = 0;
  std::size_t swaps = 0;
  std::size_t undetected_vaps = 0;
  double recording_duration = 0.0;
  double vap_duration = 0.0;

  std::optional<double> az_error_mean_deg;
  std::optional<double> az_error_std_deg;
  std::optional<double> el_error_mean_deg;
  std::optional<double> el_error_std_deg;
  std::optional<double> p_d;
  std::vector<std::optional<double>> p_d_per_source;
  std::optional<double> far_recording;
  std::optional<double> far_vap;
  std::optional<double> track_latency;
  std::optional<double> tfr;

  std::vector<OspaSummary> ospa;
  std::vector<VapRecord> vaps;
};

struct EvalParams {
  double gate_deg = kDefaultGateDeg;
  std::vector<double> ospa_orders = {1.0, 5.0};
  double ospa_cutoff_deg = kDefaultOspaCutoffDeg;
  // p_d as the mean of per-source ratios instead of pooling all source timestamps
  bool pd_per_source = false;

  void validate() const {
    if (!(gate_deg > 0.0) || !std::isfinite(gate_deg)) throw ArgumentError("EvalParams: gate must be positive");
    if (!(ospa_cutoff_deg > 0.0) || !std::isfinite(ospa_cutoff_deg))
      throw ArgumentError("EvalParams: OSPA cutoff must be positive");
    for (double p : ospa_orders)
      if (!(p >= 1.0) || !std::isfinite(p)) throw ArgumentError("EvalParams: OSPA order must be >= 1");
  }
};

namespace detail {

struct MeanStd {
  std::optional<double> mean;
  std::optional<double> stddev;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  if (v.empty()) return {};
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  double q = 0.0;
  for (double x : v) q += (x - m) * (x - m);
  return {m, std::sqrt(q / static_cast<double>(v.size()))};
}

}  // namespace detail

/// OSPA between azimuth sets given in radians. Returns degrees in [0, cutoff].
inline double ospa(std::span<const double> truth, std::span<const double> est, double p = 1.0,
                   double cutoff_deg = kDefaultOspaCutoffDeg) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw ArgumentError("ospa: order must be >= 1");
  if (!(cutoff_deg > 0.0) || !std::isfinite(cutoff_deg)) throw ArgumentError("ospa: cutoff must be positive");
  std::span<const double> a = truth, b = est;
  if (a.size() > b.size()) std::swap(a, b);
  if (b.empty()) return 0.0;
  double assigned = 0.0;
  if (!a.empty()) {
    Eigen::MatrixXd cost(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        const double d = std::abs(rad2deg(wrap_angle(a[i] - b[j])));
        cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::pow(std::min(cutoff_deg, d), p);
      }
    assigned = solve_assignment(cost).total_cost;
  }
  const double card = static_cast<double>(b.size() - a.size()) * std::pow(cutoff_deg, p);
  const double v = std::pow((assigned + card) / static_cast<double>(b.size()), 1.0 / p);
  return std::clamp(v, 0.0, cutoff_deg);
}

namespace detail {

/// Estimates grouped by clock index; throws on timestamps off the clock.
inline std::vector<std::vector<DoaEstimate>> bin_by_clock(const std::vector<double>& clock,
                                                          std::span<const DoaEstimate> est) {
  std::vector<std::vector<DoaEstimate>> out(clock.size());
  for (const auto& e : est) {
    auto it = std::lower_bound(clock.begin(), clock.end(), e.timestamp - kClockTolerance);
    if (it == clock.end() || std::abs(*it - e.timestamp) > kClockTolerance)
      throw ClockMismatchError(e.timestamp,
                               "estimate timestamp " + std::to_string(e.timestamp) + " is not on the evaluation clock");
    out[static_cast<std::size_t>(it - clock.begin())].push_back(e);
  }
  return out;
}

inline std::vector<ActiveSource> active_at(const GroundTruth& gt, std::size_t k) {
  std::vector<ActiveSource> a;
  for (std::size_t n = 0; n < gt.source_count(); ++n)
    if (gt.vaps.active(n, gt.clock[k])) a.push_back({n, gt.doas[n][k]});
  return a;
}

}  // namespace detail

/// OSPA per clock sample with mean and standard deviation.
inline OspaSummary ospa_series(const GroundTruth& gt, std::span<const DoaEstimate> submission, double p = 1.0,
                               double cutoff_deg = kDefaultOspaCutoffDeg) {
  const auto binned = detail::bin_by_clock(gt.clock, submission);
  OspaSummary s;
  s.order = p;
  s.cutoff_deg = cutoff_deg;
  s.series.reserve(gt.clock.size());
  std::vector<double> a, b;
  for (std::size_t k = 0; k < gt.clock.size(); ++k) {
    a.clear();
    b.clear();
    for (const auto& t : detail::active_at(gt, k)) a.push_back(t.doa.azimuth());
    for (const auto& e : binned[k]) b.push_back(e.doa.azimuth());
    s.series.push_back(ospa(a, b, p, cutoff_deg));
  }
  const auto ms = detail::mean_std(s.series);
  s.mean = ms.mean.value_or(0.0);
  s.stddev = ms.stddev.value_or(0.0);
  return s;
}

/// Aggregates an association sequence into the per-recording measures.
inline MetricsReport compute_metrics(std::span<const AssociationSlice> assoc, const VapTable& vaps,
                                     std::span<const double> clock, double recording_duration,
                                     bool pd_per_source = false) {
  if (assoc.size() != clock.size()) throw ArgumentError("compute_metrics: one association slice per clock sample");
  MetricsReport r;
  r.timestamps = clock.size();
  r.recording_duration = recording_duration;
  r.vap_duration = vaps.total_duration();

  std::vector<double> az, el;
  for (std::size_t k = 0; k < assoc.size(); ++k) {
    const auto& s = assoc[k];
    r.valid_pairs += s.pairs.size();
    r.false_estimates += s.false_estimates.size();
    r.missed += s.missed_sources.size();
    if (vaps.any_active(clock[k])) r.false_in_vap += s.false_estimates.size();
    for (const auto& p : s.pairs) {
      az.push_back(std::abs(rad2deg(p.error.azimuth)));
      if (p.has_elevation) el.push_back(std::abs(rad2deg(p.error.elevation)));
    }
  }
  const auto a = detail::mean_std(az), e = detail::mean_std(el);
  r.az_error_mean_deg = a.mean;
  r.az_error_std_deg = a.stddev;
  r.el_error_mean_deg = e.mean;
  r.el_error_std_deg = e.stddev;

  // per-VAP records
  std::size_t total_ts = 0, total_valid = 0;
  std::vector<double> latencies;
  r.p_d_per_source.assign(vaps.source_count(), std::nullopt);
  for (std::size_t n = 0; n < vaps.source_count(); ++n) {
    std::size_t src_ts = 0, src_valid = 0;
    for (std::size_t ai = 0; ai < vaps.sources[n].size(); ++ai) {
      VapRecord v;
      v.source = n;
      v.period = ai;
      v.interval = vaps.sources[n][ai];
      double err_sum = 0.0;
      std::optional<double> onset;  // first clock sample inside the VAP
      for (std::size_t k = 0; k < clock.size(); ++k) {
        if (!v.interval.contains(clock[k])) continue;
        if (!onset) onset = clock[k];
        ++v.timestamps;
        for (const auto& p : assoc[k].pairs) {
          if (p.source != n) continue;
          ++v.valid;
          err_sum += std::abs(rad2deg(p.error.azimuth));
          if (!v.latency) v.latency = clock[k] - *onset;
        }
      }
      if (v.valid > 0) v.mean_abs_az_error_deg = err_sum / static_cast<double>(v.valid);
      if (v.latency)
        latencies.push_back(*v.latency);
      else
        ++r.undetected_vaps;
      src_ts += v.timestamps;
      src_valid += v.valid;
      r.vaps.push_back(v);
    }
    if (src_ts > 0) r.p_d_per_source[n] = static_cast<double>(src_valid) / static_cast<double>(src_ts);
    total_ts += src_ts;
    total_valid += src_valid;
  }
  if (pd_per_source) {
    double s = 0.0;
    std::size_t cnt = 0;
    for (const auto& p : r.p_d_per_source)
      if (p) {
        s += *p;
        ++cnt;
      }
    if (cnt > 0) r.p_d = s / static_cast<double>(cnt);
  } else if (total_ts > 0) {
    r.p_d = static_cast<double>(total_valid) / static_cast<double>(total_ts);
  }

  if (recording_duration > 0.0) r.far_recording = static_cast<double>(r.false_estimates) / recording_duration;
  if (!latencies.empty()) r.track_latency = detail::mean_std(latencies).mean;

  const auto frag = detect_fragmentation(assoc, vaps);
  r.breaks = frag.total_breaks;
  r.swaps = frag.total_swaps;
  if (r.vap_duration > 0.0) {
    r.far_vap = static_cast<double>(r.false_in_vap) / r.vap_duration;
    r.tfr = static_cast<double>(r.breaks + r.swaps) / r.vap_duration;
  }
  return r;
}

/// Full evaluation of one submission against one recording's ground truth.
inline MetricsReport evaluate_submission(const GroundTruth& gt, std::span<const DoaEstimate> submission,
                                         const EvalParams& params = {}) {
  params.validate();
  const auto binned = detail::bin_by_clock(gt.clock, submission);
  std::vector<AssociationSlice> assoc;
  assoc.reserve(gt.clock.size());
  for (std::size_t k = 0; k < gt.clock.size(); ++k) {
    const auto active = detail::active_at(gt, k);
    auto s = gate_and_associate(active, binned[k], params.gate_deg);
    s.timestamp = gt.clock[k];
    assoc.push_back(std::move(s));
  }
  auto r = compute_metrics(assoc, gt.vaps, gt.clock, gt.duration, params.pd_per_source);
  for (double p : params.ospa_orders) r.ospa.push_back(ospa_series(gt, submission, p, params.ospa_cutoff_deg));
  return r;
}

/// Ground truth rendered as a submission: one estimate per active source per clock sample, id = source + 1.
inline std::vector<DoaEstimate> truth_as_submission(const GroundTruth& gt) {
  std::vector<DoaEstimate> out;
  for (std::size_t k = 0; k < gt.clock.size(); ++k)
    for (std::size_t n = 0; n < gt.source_count(); ++n)
      if (gt.vaps.active(n, gt.clock[k])) out.push_back({gt.clock[k], gt.doas[n][k], static_cast<int>(n + 1), 1.0, true});
  return out;
}

/// Unweighted mean over recordings of each defined measure.
inline MetricsReport aggregate(std::span<const MetricsReport> reports) {
  MetricsReport m;
  if (reports.empty()) return m;
  auto avg = [&](auto member) -> std::optional<double> {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& r : reports)
      if (const auto& v = r.*member) {
        s += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return s / static_cast<double>(n);
  };
  m.az_error_mean_deg = avg(&MetricsReport::az_error_mean_deg);
  m.az_error_std_deg = avg(&MetricsReport::az_error_std_deg);
  m.el_error_mean_deg = avg(&MetricsReport::el_error_mean_deg);
  m.el_error_std_deg = avg(&MetricsReport::el_error_std_deg);
  m.p_d = avg(&MetricsReport::p_d);
  m.far_recording = avg(&MetricsReport::far_recording);
  m.far_vap = avg(&MetricsReport::far_vap);
  m.track_latency = avg(&MetricsReport::track_latency);
  m.tfr = avg(&MetricsReport::tfr);
  for (const auto& r : reports) {
    m.timestamps += r.timestamps;
    m.valid_pairs += r.valid_pairs;
    m.false_estimates += r.false_estimates;
    m.false_in_vap += r.false_in_vap;
    m.missed += r.missed;
    m.breaks += r.breaks;
    m.swaps += r.swaps;
    m.undetected_vaps += r.undetected_vaps;
    m.recording_duration += r.recording_duration;
    m.vap_duration += r.vap_duration;
  }
  // OSPA mean pools all timestamps of all recordings
  for (std::size_t i = 0; i < reports.front().ospa.size(); ++i) {
    OspaSummary s;
    s.order = reports.front().ospa[i].order;
    s.cutoff_deg = reports.front().ospa[i].cutoff_deg;
    for (const auto& r : reports)
      if (i < r.ospa.size()) s.series.insert(s.series.end(), r.ospa[i].series.begin(), r.ospa[i].series.end());
    const auto ms = detail::mean_std(s.series);
    s.mean = ms.mean.value_or(0.0);
    s.stddev = ms.stddev.value_or(0.0);
    s.series.clear();
    m.ospa.push_back(std::move(s));
  }
  return m;
}

}  // namespace locata::evaluate
