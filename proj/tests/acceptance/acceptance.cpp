// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Acceptance run: one PASS/FAIL/SKIP line per criterion, nonzero exit if any criterion fails.
// Criterion 11 needs LOCATA_CORPUS_DIR (a development recording directory) and optionally
// LOCATA_CORPUS_LAYOUT (a layout JSON, default formats/locata_corpus.json).

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "locata/assignment.hpp"
#include "locata/corpus_io.hpp"
#include "locata/evaluate.hpp"
#include "locata/pipeline.hpp"
#include "locata/report.hpp"
#include "locata/simulate.hpp"
#include "locata/track.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace locata;
using localize::DoaEstimate;
using geometry::deg2rad;
using geometry::Mat3;
using geometry::Pose;
using geometry::rad2deg;
using geometry::Trajectory;
using geometry::Vec3;
namespace fs = corpus_io::fs;

namespace {

struct Outcome {
  enum Status { Pass, Fail, Skip } status = Fail;
  std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(detail)}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() / ("locata_accept_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

pipeline::PipelineConfig pipeline_config(const std::string& localizer, const std::string& filter) {
  pipeline::PipelineConfig pc;
  pc.localizer.kind = pipeline::localizer_from_name(localizer);
  pc.tracker.filter = track::filter_from_name(filter);
  pc.tracker.emit_from_birth = true;
  pc.tracker.backfill_s = 0.25;
  return pc;
}

struct RunResult {
  evaluate::MetricsReport report;
  pipeline::PipelineOutput output;
  double seconds = 0.0;
};

RunResult run_and_score(const simulate::Scene& scene, const pipeline::PipelineConfig& pc) {
  const auto b = corpus_io::bundle_from_scene(scene);
  const auto gt = b.ground_truth();
  RunResult r;
  const auto t0 = std::chrono::steady_clock::now();
  r.output = pipeline::run(b.audio, b.array, gt.clock, pc);
  r.seconds = seconds_since(t0);
  r.report = evaluate::evaluate_submission(gt, r.output.estimates, {});
  return r;
}

// ---------------------------------------------------------------------------------------------

Outcome ospa_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> size(0, 4);
  std::uniform_real_distribution<double> az(-180.0, 180.0), order(1.0, 5.0), cutoff(5.0, 120.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a_deg(static_cast<std::size_t>(size(rng))), b_deg(static_cast<std::size_t>(size(rng)));
    for (auto& v : a_deg) v = az(rng);
    for (auto& v : b_deg) v = az(rng);
    const double p = i % 3 == 0 ? 1.0 : (i % 3 == 1 ? 5.0 : order(rng));
    const double c = i % 2 ? 30.0 : cutoff(rng);
    std::vector<double> a, b;
    for (double v : a_deg) a.push_back(deg2rad(v));
    for (double v : b_deg) b.push_back(deg2rad(v));
    const double got = evaluate::ospa(a, b, p, c);
    const double want = oracles::brute_force_ospa(a_deg, b_deg, p, c);
    worst = std::max(worst, std::abs(got - want));
  }
  const double secs = seconds_since(t0);
  return verdict(worst <= 1e-9 && secs < 5.0, fmt("max |ospa - brute force| = %.3g deg over 1000 instances, %.2f s", worst, secs));
}

Outcome assignment_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> dim(1, 7), entry(0, 99);
  std::size_t mismatches = 0, invalid = 0;
  for (int i = 0; i < 1000; ++i) {
    // integer costs keep every partial sum exact, so equality is meaningful
    Eigen::MatrixXd cost(dim(rng), dim(rng));
    for (Eigen::Index r = 0; r < cost.rows(); ++r)
      for (Eigen::Index c = 0; c < cost.cols(); ++c) cost(r, c) = entry(rng);
    const auto a = solve_assignment(cost);
    if (a.total_cost != oracles::brute_force_assignment(cost)) ++mismatches;
    double sum = 0.0;
    std::vector<char> used(static_cast<std::size_t>(cost.cols()), 0);
    std::size_t assigned = 0;
    for (std::size_t r = 0; r < a.row_to_col.size(); ++r) {
      const int c = a.row_to_col[r];
      if (c < 0) continue;
      if (used[static_cast<std::size_t>(c)]) ++invalid;
      used[static_cast<std::size_t>(c)] = 1;
      sum += cost(static_cast<Eigen::Index>(r), c);
      ++assigned;
    }
    if (sum != a.total_cost || assigned != static_cast<std::size_t>(std::min(cost.rows(), cost.cols()))) ++invalid;
  }
  const double secs = seconds_since(t0);
  return verdict(mismatches == 0 && invalid == 0 && secs < 10.0,
                 fmt("%zu cost mismatches, %zu invalid assignments in 1000 instances up to 7x7, %.2f s", mismatches,
                     invalid, secs));
}

Outcome self_evaluation() {
  simulate::PresetOptions po;
  po.duration = 8.0;
  const auto scene = simulate::synthesize(simulate::task_preset(6, 3, po));
  const auto gt = corpus_io::bundle_from_scene(scene).ground_truth();
  evaluate::EvalParams params;
  params.pd_per_source = true;
  const auto r = evaluate::evaluate_submission(gt, evaluate::truth_as_submission(gt), params);
  bool series_zero = !r.ospa.empty();
  for (const auto& s : r.ospa)
    for (double v : s.series) series_zero = series_zero && v == 0.0;
  bool per_source = r.p_d_per_source.size() == gt.source_count();
  for (const auto& v : r.p_d_per_source) per_source = per_source && v == 1.0;
  const bool ok = r.p_d == 1.0 && r.far_recording == 0.0 && r.far_vap == 0.0 && r.track_latency == 0.0 && r.tfr == 0.0 &&
                  r.az_error_mean_deg == 0.0 && r.el_error_mean_deg == 0.0 && series_zero && per_source &&
                  gt.source_count() == 2;
  return verdict(ok, fmt("%zu sources, %zu timestamps: p_d %g, FAR %g, TL %g, TFR %g, az err %g, el err %g, OSPA series %s",
                         gt.source_count(), r.timestamps, r.p_d.value_or(-1), r.far_recording.value_or(-1),
                         r.track_latency.value_or(-1), r.tfr.value_or(-1), r.az_error_mean_deg.value_or(-1),
                         r.el_error_mean_deg.value_or(-1), series_zero ? "all zero" : "nonzero"));
}

Outcome gating() {
  const std::vector<evaluate::ActiveSource> truth = {{0, geometry::Doa::horizontal(0.0)}};
  DoaEstimate e;
  e.doa = geometry::Doa::horizontal(deg2rad(35.0));
  const std::vector<DoaEstimate> est = {e};
  const auto a = evaluate::gate_and_associate(truth, est, 30.0);
  return verdict(a.pairs.empty() && a.false_estimates.size() == 1 && a.missed_sources.size() == 1,
                 fmt("35 deg error at a 30 deg gate: %zu valid, %zu false, %zu missed", a.pairs.size(),
                     a.false_estimates.size(), a.missed_sources.size()));
}

Outcome task1_accuracy() {
  struct Case {
    const char* array;
    const char* localizer;
    const char* filter;
    double limit;
  };
  const Case cases[] = {{"robot_head", "srp-phat", "kalman", 2.0},
                        {"robot_head", "music", "kalman", 2.0},
                        {"dicit_32cm", "gcc-phat", "kalman", 2.0},
                        {"eigenmike", "pseudo-intensity", "kalman", 3.0}};
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    simulate::PresetOptions po;
    po.array = c.array;
    po.duration = 10.0;
    po.snr_db = 20.0;
    const auto scene = simulate::synthesize(simulate::task_preset(1, 1, po));
    const auto r = run_and_score(scene, pipeline_config(c.localizer, c.filter));
    const double err = r.report.az_error_mean_deg.value_or(INFINITY);
    ok = ok && err <= c.limit && r.seconds < 30.0;
    detail += fmt("%s%s/%s %.3f deg (<= %.1f) %.1f s", detail.empty() ? "" : "; ", c.localizer, c.array, err, c.limit,
                  r.seconds);
  }
  return verdict(ok, detail);
}

/// Source sweeping through the array's back direction. Even seeds: static array, moving source.
/// Odd seeds: static source, array turning about z.
simulate::Scene wrap_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> start(deg2rad(140), deg2rad(160)), sweep(deg2rad(40), deg2rad(70)),
      radius(2.0, 3.0);
  const double duration = 10.0, rate = geometry::kDefaultTrajectoryRate;
  simulate::SceneConfig cfg;
  cfg.duration = duration;
  cfg.seed = seed;
  cfg.array = geometry::presets::robot_head();
  const double a0 = start(rng), span = sweep(rng), r = radius(rng);
  std::vector<Pose> src, arr;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) / rate;
    if (t > duration + 1e-9) break;
    const double u = t / duration;
    if (seed % 2 == 0) {
      const double a = a0 + span * u;
      src.emplace_back(Vec3(r * std::cos(a), r * std::sin(a), 0.0), Mat3::Identity(), t);
      arr.emplace_back(Vec3::Zero(), Mat3::Identity(), t);
    } else {
      src.emplace_back(Vec3(r * std::cos(a0 + span), r * std::sin(a0 + span), 0.0), Mat3::Identity(), t);
      arr.emplace_back(Vec3::Zero(), geometry::rotation_about_z(span * (1.0 - u)), t);
    }
  }
  cfg.array_trajectory = Trajectory(std::move(arr), rate);
  simulate::SourceSpec s;
  s.name = "talker";
  s.trajectory = Trajectory(std::move(src), rate);
  s.vaps = simulate::detail::random_vaps(duration, rng);
  s.snr_db = 20.0;
  cfg.sources.push_back(std::move(s));
  return simulate::synthesize(cfg);
}

Outcome wrapped_tracking() {
  bool ok = true;
  double worst_err = 0.0, worst_jump = 0.0, sum_err = 0.0;
  std::size_t crossings = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto scene = wrap_scene(seed);
    const auto gt = corpus_io::bundle_from_scene(scene).ground_truth();
    // the truth itself must cross the wrap for the scene to be meaningful
    for (std::size_t k = 1; k < gt.clock.size(); ++k)
      if (std::abs(gt.doas[0][k].azimuth() - gt.doas[0][k - 1].azimuth()) > geometry::kPi) {
        ++crossings;
        break;
      }
    const auto r = run_and_score(scene, pipeline_config("srp-phat", "wrapped-kalman"));
    const double err = r.report.az_error_mean_deg.value_or(INFINITY);
    double jump = 0.0;
    for (const auto& t : r.output.tracks)
      for (std::size_t k = 1; k < t.states.size(); ++k)
        jump = std::max(jump, std::abs(rad2deg(geometry::wrap_angle(t.states[k].mean(0) - t.states[k - 1].mean(0)))));
    ok = ok && err <= 5.0 && jump <= 90.0;
    worst_err = std::max(worst_err, err);
    worst_jump = std::max(worst_jump, jump);
    sum_err += err;
  }
  ok = ok && crossings == 10;
  return verdict(ok, fmt("10 scenes (%zu cross +-180 deg): mean error %.3f deg, worst %.3f deg, largest state step %.2f deg",
                         crossings, sum_err / 10.0, worst_err, worst_jump));
}

Outcome degradation_ordering() {
  const int tasks[] = {1, 3, 5};
  double mean[3] = {0, 0, 0};
  for (int i = 0; i < 3; ++i) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      simulate::PresetOptions po;
      po.duration = 10.0;
      const auto scene = simulate::synthesize(simulate::task_preset(tasks[i], seed, po));
      const auto r = run_and_score(scene, pipeline_config("srp-phat", "wrapped-kalman"));
      mean[i] += r.report.az_error_mean_deg.value_or(INFINITY) / 5.0;
    }
  }
  return verdict(mean[0] <= mean[1] && mean[1] <= mean[2],
                 fmt("robot_head SRP-PHAT, seeds 1-5: task 1 %.3f, task 3 %.3f, task 5 %.3f deg", mean[0], mean[1], mean[2]));
}

Outcome gcc_delays() {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> shift(-20, 20);
  std::uniform_real_distribution<double> frac(-20.0, 20.0);
  double worst_int = 0.0, worst_frac = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const bool integer = trial % 2 == 0;
    const double d = integer ? shift(rng) : frac(rng);
    const auto x = testsupport::white_noise(48000, 1000 + static_cast<std::uint64_t>(trial));
    sigproc::MultichannelAudio a;
    a.channels = {testsupport::circular_delay(x, d), x};
    testsupport::add_noise(a, 0.1, 5000 + static_cast<std::uint64_t>(trial));  // 20 dB
    const auto frames = sigproc::frame_signal(a, 2048, 1024);
    const auto cs = sigproc::cross_power_spectrum(frames, 0, 1);
    localize::GccOptions opt;
    opt.interpolation = 4;
    const double err = std::abs(localize::gcc_phat(cs, 25.0, opt).delay - d);
    (integer ? worst_int : worst_frac) = std::max(integer ? worst_int : worst_frac, err);
  }
  return verdict(worst_int <= 0.05 && worst_frac <= 0.1,
                 fmt("100 trials at 20 dB: worst integer-shift error %.4f samples, worst fractional %.4f samples",
                     worst_int, worst_frac));
}

Outcome particle_vs_kalman() {
  constexpr std::size_t kParticles = 10000;
  const double bound = 3.0 / std::sqrt(static_cast<double>(kParticles));
  double worst_rms = 0.0, worst_step = 0.0;
  std::size_t failing = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    std::mt19937_64 rng(seed);
    track::PfParams params;
    std::normal_distribution<double> noise(0.0, params.obs_std);
    track::TrackState kf;
    kf.mean = track::Vec2(0.5, 0.0);
    kf.covariance = track::Mat2::Zero();
    kf.covariance(0, 0) = params.obs_std * params.obs_std;
    kf.covariance(1, 1) = 0.25;
    auto ps = track::pf_init(kf.mean, kf.covariance, kParticles, rng);
    double truth = 0.5, sum2 = 0.0;
    for (int k = 0; k < 50; ++k) {
      truth += deg2rad(1.0);
      const double z = truth + noise(rng);
      track::pf_step(ps, z, 0.1, params, rng);
      kf = track::kf_update(track::kf_predict(kf, 0.1), z, params.obs_std * params.obs_std);
      const double ratio =
          std::abs(geometry::wrap_angle(track::particle_mean(ps)(0) - kf.mean(0))) / std::sqrt(kf.covariance(0, 0));
      sum2 += ratio * ratio;
      worst_step = std::max(worst_step, ratio);
    }
    const double rms = std::sqrt(sum2 / 50.0);
    worst_rms = std::max(worst_rms, rms);
    if (rms > bound) ++failing;
  }
  return verdict(failing == 0,
                 fmt("I = %zu, 20 seeds x 50 steps: worst RMS |pf - kf| / sigma_kf = %.4f (bound %.4f), "
                     "largest single step %.4f",
                     kParticles, worst_rms, bound, worst_step));
}

Trajectory random_trajectory(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-5, 5), ang(-M_PI, M_PI);
  std::vector<Pose> p;
  double t = u(rng);
  for (std::size_t k = 0; k < n; ++k) {
    t += 0.001 + std::abs(u(rng)) / 10;
    const Mat3 r =
        (Eigen::AngleAxisd(ang(rng), Vec3::UnitZ()) * Eigen::AngleAxisd(ang(rng), Vec3::UnitX())).toRotationMatrix();
    p.emplace_back(Vec3(u(rng), u(rng), u(rng)), r, t);
  }
  return Trajectory(std::move(p), 120.0);
}

bool same_trajectory(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto &x = a.samples()[k], &y = b.samples()[k];
    if (x.timestamp() != y.timestamp() || x.translation() != y.translation()) return false;
    if ((x.rotation() - y.rotation()).norm() > 1e-12) return false;
  }
  return true;
}

Outcome round_trips() {
  TempDir dir("io");
  std::mt19937_64 rng(1010);
  std::uniform_real_distribution<double> u(-1, 1), az(-180, 180), el(0, 180);
  std::uniform_int_distribution<int> ch(2, 4), len(0, 40), npos(1, 6), nsrc(0, 2), rows(0, 30);
  std::size_t scene_bad = 0, sub_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    corpus_io::RecordingBundle b;
    b.metadata.recording_id = "r" + std::to_string(trial);
    b.metadata.array_name = "custom";
    std::vector<Vec3> mics;
    for (int m = ch(rng); m > 0; --m) mics.emplace_back(u(rng), u(rng), u(rng));
    b.array = geometry::ArrayGeometry("custom", mics);
    b.audio = sigproc::MultichannelAudio::zeros(mics.size(), static_cast<std::size_t>(len(rng)), 48000);
    for (auto& x : b.audio.channels)
      for (auto& v : x) v = u(rng);
    b.array_trajectory = random_trajectory(rng, static_cast<std::size_t>(npos(rng)));
    std::vector<Trajectory> trajs;
    VapTable vaps;
    for (int s = nsrc(rng); s > 0; --s) {
      b.metadata.source_names.push_back("talker" + std::to_string(s));
      trajs.push_back(random_trajectory(rng, static_cast<std::size_t>(npos(rng))));
      std::vector<Interval> iv;
      double t = u(rng);
      for (int k = 0; k < 3; ++k) {
        iv.push_back({t, t + 0.5 + std::abs(u(rng))});
        t = iv.back().end + 0.1 + std::abs(u(rng));
      }
      vaps.sources.push_back(iv);
    }
    b.source_trajectories = trajs;
    b.vaps = vaps;
    const auto d = dir.path() / "scene";
    corpus_io::write_recording(b, d);
    const auto r = corpus_io::read_recording(d);
    bool same = r.audio.channels == b.audio.channels && r.array.mic_positions() == mics && r.vaps && *r.vaps == vaps &&
                same_trajectory(r.array_trajectory, b.array_trajectory) && r.source_trajectories && r.source_trajectories->size() == trajs.size();
    for (std::size_t s = 0; same && s < trajs.size(); ++s) same = same_trajectory((*r.source_trajectories)[s], trajs[s]);
    if (!same) ++scene_bad;
    fs::remove_all(d);

    std::vector<DoaEstimate> v;
    const int n = rows(rng);
    for (int k = 0; k < n; ++k) {
      DoaEstimate e;
      e.timestamp = (k / 2) / 120.0;
      e.source_id = k % 2 + 1;
      e.has_elevation = trial % 3 != 0;
      e.doa = geometry::Doa(deg2rad(az(rng)), deg2rad(e.has_elevation ? el(rng) : 90.0));
      v.push_back(e);
    }
    const auto p = dir.path() / "sub.csv";
    corpus_io::write_submission(p, v);
    const auto got = corpus_io::read_submission(p);
    bool ok = got.size() == v.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i) {
      // six decimals in degrees on disk
      ok = std::abs(got[i].timestamp - v[i].timestamp) <= 1e-9 && got[i].source_id == v[i].source_id &&
           got[i].has_elevation == v[i].has_elevation &&
           std::abs(rad2deg(geometry::wrap_angle(got[i].doa.azimuth() - v[i].doa.azimuth()))) <= 0.5e-6 + 1e-9 &&
           (!v[i].has_elevation || std::abs(rad2deg(got[i].doa.elevation() - v[i].doa.elevation())) <= 0.5e-6 + 1e-9);
    }
    if (!ok) ++sub_bad;
  }
  return verdict(scene_bad == 0 && sub_bad == 0,
                 fmt("1000 randomized scenes: %zu mismatched; 1000 submissions: %zu mismatched", scene_bad, sub_bad));
}

Outcome corpus_smoke() {
  const char* corpus = std::getenv("LOCATA_CORPUS_DIR");
  if (!corpus || !*corpus) return {Outcome::Skip, "LOCATA_CORPUS_DIR not set"};
  const char* layout_env = std::getenv("LOCATA_CORPUS_LAYOUT");
  const std::string layout = layout_env && *layout_env ? layout_env : std::string(LOCATA_LAYOUT_DIR) + "/locata_corpus.json";
  TempDir dir("corpus");
  const auto sub = dir.path() / "music.csv";
  const auto log = dir.path() / "log.txt";
  const std::string cli = LOCATA_CLI_PATH;
  const std::string common = " --layout '" + layout + "'";
  const std::string run = "'" + cli + "' run --in '" + corpus + "'" + common + " --localizer music --out '" + sub.string() +
                          "' > '" + log.string() + "' 2>&1";
  if (std::system(run.c_str()) != 0) {
    std::ifstream in(log);
    return {Outcome::Fail, "run failed: " + std::string(std::istreambuf_iterator<char>(in), {})};
  }
  const auto out = dir.path() / "eval";
  const std::string eval = "'" + cli + "' evaluate --truth '" + corpus + "'" + common + " --submission '" + sub.string() +
                           "' --gate 30 --ospa-p 1,5 --ospa-c 30 --out '" + out.string() + "' > '" + log.string() +
                           "' 2>&1";
  if (std::system(eval.c_str()) != 0) {
    std::ifstream in(log);
    return {Outcome::Fail, "evaluate failed: " + std::string(std::istreambuf_iterator<char>(in), {})};
  }
  std::ifstream csv(out / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  const bool columns = header.find("ospa_p1_c30_mean_deg") != std::string::npos &&
                       header.find("ospa_p5_c30_mean_deg") != std::string::npos;
  std::ifstream js(out / "metrics.json");
  const auto j = nlohmann::json::parse(js);
  const auto r = report::metrics_from_json(j.at("reports").at(0));
  bool finite = r.ospa.size() == 2;
  for (const auto& o : r.ospa) finite = finite && std::isfinite(o.mean) && std::isfinite(o.stddev);
  for (const auto& v : {r.p_d, r.far_recording}) finite = finite && (!v || std::isfinite(*v));
  return verdict(columns && finite, fmt("MUSIC on %s: p_d %.3f, az error %.2f deg, OSPA(p=1) %.2f deg, columns %s", corpus,
                                        r.p_d.value_or(NAN), r.az_error_mean_deg.value_or(NAN),
                                        r.ospa.empty() ? NAN : r.ospa[0].mean, columns ? "present" : "missing"));
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"OSPA matches brute force", ospa_oracle},
      {"Munkres matches brute force", assignment_oracle},
      {"self-evaluation is exact", self_evaluation},
      {"30 deg gating", gating},
      {"task 1 synthetic accuracy", task1_accuracy},
      {"wrapped Kalman across +-180 deg", wrapped_tracking},
      {"task 1 <= 3 <= 5 error ordering", degradation_ordering},
      {"GCC-PHAT delay recovery", gcc_delays},
      {"particle filter agrees with Kalman", particle_vs_kalman},
      {"format round trips", round_trips},
      {"corpus run and evaluate", corpus_smoke},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Outcome::Fail, std::string("exception: ") + e.what()};
    }
    const char* status = o.status == Outcome::Pass ? "PASS" : (o.status == Outcome::Skip ? "SKIP" : "FAIL");
    if (o.status == Outcome::Fail) ++failures;
    std::printf("criterion %2zu %s  %s: %s [%.1f s]\n", i + 1, status, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
