// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// locata: simulate scenes, run localizer+tracker pipelines, evaluate submissions, merge reports.
// Exit codes: 0 success, 1 usage or configuration error, 2 data error.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <set>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "locata/corpus_io.hpp"
#include "locata/evaluate.hpp"
#include "locata/pipeline.hpp"
#include "locata/report.hpp"
#include "locata/simulate.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace locata;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr const char* kVersion = "0.1.0";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------------------------
// Configuration

struct Config {
  // scene
  int task = 1;
  std::uint64_t seed = 1;
  std::string array = "robot_head";
  double duration = 10.0;
  double snr_db = 20.0;
  std::string noise = "white";
  double noise_rms = 0.01;
  double max_speed = 1.2;
  std::string sample_format = "float64";
  std::string recording_id;

  pipeline::PipelineConfig pipeline;
  evaluate::EvalParams eval;
  bool ospa_series = false;
  unsigned jobs = 0;  // 0: hardware concurrency

  // paths
  std::string layout;
  std::string input;
  std::string output;
  std::vector<std::string> truth;
  std::vector<std::string> submission;

  Config() {
    // submissions cover VAP onsets: emit from the first observation, held back 0.25 s
    pipeline.tracker.emit_from_birth = true;
    pipeline.tracker.backfill_s = 0.25;
  }
};

wav::SampleFormat format_from_name(const std::string& n) {
  if (n == "float64") return wav::SampleFormat::Float64;
  if (n == "float32") return wav::SampleFormat::Float32;
  if (n == "pcm16") return wav::SampleFormat::Pcm16;
  if (n == "pcm24") return wav::SampleFormat::Pcm24;
  if (n == "pcm32") return wav::SampleFormat::Pcm32;
  throw UsageError("unknown sample format '" + n + "' (float64, float32, pcm16, pcm24, pcm32)");
}

std::string tracker_name(track::FilterKind k) {
  switch (k) {
    case track::FilterKind::Kalman: return "kalman";
    case track::FilterKind::WrappedKalman: return "wrapped-kalman";
    case track::FilterKind::Particle: return "particle";
  }
  return "?";
}

json config_to_json(const Config& c) {
  const auto& fe = c.pipeline.frontend;
  const auto& lc = c.pipeline.localizer;
  const auto& tc = c.pipeline.tracker;
  json j;
  j["scene"] = {{"task", c.task},          {"seed", c.seed},           {"array", c.array},
                {"duration_s", c.duration}, {"snr_db", c.snr_db},       {"noise", c.noise},
                {"noise_rms", c.noise_rms}, {"max_speed", c.max_speed}, {"sample_format", c.sample_format}};
  j["frontend"] = {{"window_length", fe.window_length}, {"hop", fe.hop},
                   {"block_frames", fe.block_frames},   {"block_hop", fe.block_hop},
                   {"band_hz", {fe.band_lo_hz, fe.band_hi_hz}},
                   {"vad", fe.vad},                     {"vad_percentile", fe.vad_percentile},
                   {"vad_margin_db", fe.vad_margin_db}};
  j["localizer"] = {{"name", pipeline::localizer_name(lc.kind)},
                    {"n_sources", lc.n_sources},
                    {"grid_resolution_deg", lc.grid_resolution_deg},
                    {"azimuth_only", lc.azimuth_only},
                    {"min_separation_deg", lc.min_separation_deg},
                    {"min_peak_ratio", lc.min_peak_ratio},
                    {"diagonal_loading", lc.diagonal_loading}};
  j["tracker"] = {{"name", tracker_name(tc.filter)},
                  {"confirm_hits", tc.confirm_hits},
                  {"confirm_window", tc.confirm_window},
                  {"gate_sigma", tc.gate_sigma},
                  {"max_gate_deg", tc.max_gate_deg},
                  {"t_miss_s", tc.t_miss},
                  {"process_noise", tc.process_noise},
                  {"obs_std_deg", geometry::rad2deg(tc.obs_std)},
                  {"initial_rate_std", tc.initial_rate_std},
                  {"particles", tc.particles},
                  {"seed", tc.seed},
                  {"emit_from_birth", tc.emit_from_birth},
                  {"backfill_s", tc.backfill_s}};
  j["evaluation"] = {{"gate_deg", c.eval.gate_deg},
                     {"ospa_p", c.eval.ospa_orders},
                     {"ospa_c_deg", c.eval.ospa_cutoff_deg},
                     {"pd_per_source", c.eval.pd_per_source},
                     {"ospa_series", c.ospa_series}};
  j["speed_of_sound"] = c.pipeline.speed_of_sound;
  j["layout"] = c.layout;
  return j;
}

/// Reads `key` from object `o` into `dst` when present, and records the key as consumed.
template <typename T>
void take(const json& o, const char* key, T& dst, std::vector<std::string>& seen) {
  seen.emplace_back(key);
  if (o.contains(key)) dst = o.at(key).get<T>();
}

void reject_unknown(const json& o, const std::vector<std::string>& seen, const std::string& where) {
  for (const auto& [k, v] : o.items())
    if (std::find(seen.begin(), seen.end(), k) == seen.end())
      throw UsageError("config: unknown key '" + k + "' in " + where);
}

const json& section(const json& j, const char* name) {
  static const json kEmpty = json::object();
  if (!j.contains(name)) return kEmpty;
  if (!j.at(name).is_object()) throw UsageError(std::string("config: '") + name + "' must be an object");
  return j.at(name);
}

void apply_json(Config& c, const json& j) {
  if (!j.is_object()) throw UsageError("config: top level must be an object");
  std::vector<std::string> top = {"scene", "frontend", "localizer", "tracker", "evaluation", "speed_of_sound", "layout"};
  reject_unknown(j, top, "the top level");
  if (j.contains("speed_of_sound")) c.pipeline.speed_of_sound = j.at("speed_of_sound").get<double>();
  if (j.contains("layout")) c.layout = j.at("layout").get<std::string>();

  std::vector<std::string> seen;
  const auto& s = section(j, "scene");
  take(s, "task", c.task, seen);
  take(s, "seed", c.seed, seen);
  take(s, "array", c.array, seen);
  take(s, "duration_s", c.duration, seen);
  take(s, "snr_db", c.snr_db, seen);
  take(s, "noise", c.noise, seen);
  take(s, "noise_rms", c.noise_rms, seen);
  take(s, "max_speed", c.max_speed, seen);
  take(s, "sample_format", c.sample_format, seen);
  reject_unknown(s, seen, "scene");

  seen.clear();
  auto& fe = c.pipeline.frontend;
  const auto& f = section(j, "frontend");
  take(f, "window_length", fe.window_length, seen);
  take(f, "hop", fe.hop, seen);
  take(f, "block_frames", fe.block_frames, seen);
  take(f, "block_hop", fe.block_hop, seen);
  std::vector<double> band = {fe.band_lo_hz, fe.band_hi_hz};
  take(f, "band_hz", band, seen);
  if (band.size() != 2) throw UsageError("config: frontend.band_hz must be [lo, hi]");
  fe.band_lo_hz = band[0];
  fe.band_hi_hz = band[1];
  take(f, "vad", fe.vad, seen);
  take(f, "vad_percentile", fe.vad_percentile, seen);
  take(f, "vad_margin_db", fe.vad_margin_db, seen);
  reject_unknown(f, seen, "frontend");

  seen.clear();
  auto& lc = c.pipeline.localizer;
  const auto& l = section(j, "localizer");
  std::string lname = pipeline::localizer_name(lc.kind);
  take(l, "name", lname, seen);
  lc.kind = pipeline::localizer_from_name(lname);
  take(l, "n_sources", lc.n_sources, seen);
  take(l, "grid_resolution_deg", lc.grid_resolution_deg, seen);
  take(l, "azimuth_only", lc.azimuth_only, seen);
  take(l, "min_separation_deg", lc.min_separation_deg, seen);
  take(l, "min_peak_ratio", lc.min_peak_ratio, seen);
  take(l, "diagonal_loading", lc.diagonal_loading, seen);
  reject_unknown(l, seen, "localizer");

  seen.clear();
  auto& tc = c.pipeline.tracker;
  const auto& t = section(j, "tracker");
  std::string tname = tracker_name(tc.filter);
  take(t, "name", tname, seen);
  tc.filter = track::filter_from_name(tname);
  take(t, "confirm_hits", tc.confirm_hits, seen);
  take(t, "confirm_window", tc.confirm_window, seen);
  take(t, "gate_sigma", tc.gate_sigma, seen);
  take(t, "max_gate_deg", tc.max_gate_deg, seen);
  take(t, "t_miss_s", tc.t_miss, seen);
  take(t, "process_noise", tc.process_noise, seen);
  double obs_deg = geometry::rad2deg(tc.obs_std);
  take(t, "obs_std_deg", obs_deg, seen);
  tc.obs_std = geometry::deg2rad(obs_deg);
  take(t, "initial_rate_std", tc.initial_rate_std, seen);
  take(t, "particles", tc.particles, seen);
  take(t, "seed", tc.seed, seen);
  take(t, "emit_from_birth", tc.emit_from_birth, seen);
  take(t, "backfill_s", tc.backfill_s, seen);
  reject_unknown(t, seen, "tracker");

  seen.clear();
  const auto& e = section(j, "evaluation");
  take(e, "gate_deg", c.eval.gate_deg, seen);
  take(e, "ospa_p", c.eval.ospa_orders, seen);
  take(e, "ospa_c_deg", c.eval.ospa_cutoff_deg, seen);
  take(e, "pd_per_source", c.eval.pd_per_source, seen);
  take(e, "ospa_series", c.ospa_series, seen);
  reject_unknown(e, seen, "evaluation");
}

void load_config_file(Config& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    apply_json(c, j);
  } catch (const json::exception& e) {
    throw UsageError("config file '" + path + "': " + e.what());
  } catch (const ArgumentError& e) {
    throw UsageError("config file '" + path + "': " + e.what());
  }
  // a relative layout path in a config file is relative to that file
  if (j.contains("layout") && !c.layout.empty() && fs::path(c.layout).is_relative())
    c.layout = (fs::path(path).parent_path() / c.layout).lexically_normal().string();
}

void validate_scene(const Config& c) {
  if (c.task < 1 || c.task > 6) throw UsageError("task must be in 1..6, got " + std::to_string(c.task));
  const auto names = geometry::presets::names();
  if (std::find(names.begin(), names.end(), c.array) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw UsageError("unknown array preset '" + c.array + "' (" + list + ")");
  }
  if (!(c.duration > 0.0) || c.duration > 3600.0) throw UsageError("duration must be in (0, 3600] s");
  if (!std::isfinite(c.snr_db)) throw UsageError("SNR must be finite");
  if (!(c.noise_rms > 0.0)) throw UsageError("noise rms must be positive");
  if (!(c.max_speed > 0.0)) throw UsageError("max speed must be positive");
  simulate::noise_from_name(c.noise);
  format_from_name(c.sample_format);
}

void validate_pipeline(const Config& c) {
  try {
    c.pipeline.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
}

void validate_eval(const Config& c) {
  try {
    c.eval.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  if (c.eval.ospa_orders.empty()) throw UsageError("at least one OSPA order is required");
}

// ---------------------------------------------------------------------------------------------
// Manifest

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_manifest(const fs::path& path, const std::string& command, const Config& c, const json& extra = {}) {
  json m;
  m["tool"] = "locata";
  m["version"] = kVersion;
  m["command"] = command;
  const json cfg = config_to_json(c);
  m["config"] = cfg;
  m["config_hash"] = "fnv1a64:" + hex64(fnv1a(cfg.dump()));
  m["seed"] = c.seed;
  m["versions"] = {{"locata", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                         std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                   {"cli11", CLI11_VERSION},
                   {"compiler", __VERSION__}};
  if (!extra.is_null()) m["outputs"] = extra;
  corpus_io::detail::write_text(path, m.dump(2) + "\n");
}

corpus_io::Layout load_layout(const Config& c) {
  return c.layout.empty() ? corpus_io::Layout::default_layout() : corpus_io::Layout::load(c.layout);
}

// ---------------------------------------------------------------------------------------------
// Commands

int cmd_simulate(const Config& c) {
  validate_scene(c);
  if (c.output.empty()) throw UsageError("simulate: --out is required");
  simulate::PresetOptions po;
  po.array = c.array;
  po.duration = c.duration;
  po.snr_db = c.snr_db;
  po.noise = simulate::noise_from_name(c.noise);
  po.noise_rms = c.noise_rms;
  po.max_speed = c.max_speed;
  auto sc = simulate::task_preset(c.task, c.seed, po);
  sc.speed_of_sound = c.pipeline.speed_of_sound;
  const auto scene = simulate::synthesize(sc);
  const std::string id = c.recording_id.empty() ? "task" + std::to_string(c.task) + "_seed" + std::to_string(c.seed)
                                                : c.recording_id;
  const fs::path dir(c.output);
  corpus_io::write_recording(corpus_io::bundle_from_scene(scene, id), dir, format_from_name(c.sample_format));
  write_manifest(dir / "manifest.json", "simulate", c);
  std::cout << "wrote " << id << ": task " << c.task << ", array " << c.array << ", "
            << scene.source_names.size() << " source(s), " << scene.audio.length() << " samples x "
            << scene.audio.channel_count() << " channels -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_run(const Config& c) {
  validate_pipeline(c);
  if (c.input.empty()) throw UsageError("run: --in is required");
  if (c.output.empty()) throw UsageError("run: --out is required");
  const auto layout = load_layout(c);
  if (!fs::exists(c.input)) throw LoadError(c.input, "input recording not found");
  const auto bundle = corpus_io::read_recording(c.input, layout);
  for (const auto& w : bundle.warnings) std::cerr << "warning: " << w << "\n";
  try {
    pipeline::check_supported(c.pipeline, bundle.array);
  } catch (const UnsupportedGeometryError& e) {
    throw UsageError(e.what());
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  std::vector<double> clock;
  for (const auto& p : bundle.array_trajectory.samples()) clock.push_back(p.timestamp());
  auto pc = c.pipeline;
  pc.speed_of_sound = bundle.metadata.speed_of_sound;
  const auto out = pipeline::run(bundle.audio, bundle.array, clock, pc);
  const fs::path sub(c.output);
  if (sub.has_parent_path()) fs::create_directories(sub.parent_path());
  corpus_io::write_submission(sub, out.estimates);
  std::set<int> ids;
  for (const auto& e : out.estimates) ids.insert(e.source_id);
  write_manifest(fs::path(sub.string() + ".manifest.json"), "run", c,
                 {{"recording", bundle.metadata.recording_id},
                  {"array", bundle.array.name()},
                  {"blocks", out.blocks},
                  {"active_blocks", out.active_blocks},
                  {"observations", out.observations.size()},
                  {"tracks", out.tracks.size()},
                  {"estimates", out.estimates.size()}});
  std::cout << "run " << bundle.metadata.recording_id << " [" << bundle.array.name() << ", "
            << pipeline::localizer_name(pc.localizer.kind) << " + " << tracker_name(pc.tracker.filter)
            << "]: " << out.active_blocks << "/" << out.blocks << " active blocks, " << out.observations.size()
            << " observations, " << ids.size() << " track(s), " << out.estimates.size() << " estimates -> "
            << sub.string() << "\n";
  return kExitOk;
}

struct EvalJob {
  report::ReportKey key;
  evaluate::MetricsReport metrics;
  std::vector<double> clock;
};

EvalJob evaluate_one(const std::string& truth_dir, const std::string& sub_path, const Config& c,
                     const corpus_io::Layout& layout) {
  if (!fs::exists(truth_dir)) throw LoadError(truth_dir, "truth recording not found");
  const auto bundle = corpus_io::read_recording(truth_dir, layout);
  const auto gt = bundle.ground_truth();
  const auto sub = corpus_io::read_submission(sub_path);
  EvalJob job;
  job.key = {bundle.metadata.recording_id, fs::path(sub_path).filename().string(), bundle.array.name()};
  job.metrics = evaluate::evaluate_submission(gt, sub, c.eval);
  job.clock = gt.clock;
  return job;
}

std::string summary_table(const std::vector<EvalJob>& jobs) {
  std::ostringstream o;
  char line[256];
  const auto f = [](const std::optional<double>& v, const char* fmt) {
    char b[32];
    if (!v) return std::string("-");
    std::snprintf(b, sizeof b, fmt, *v);
    return std::string(b);
  };
  std::snprintf(line, sizeof line, "%-22s %-14s %8s %8s %7s %8s %8s %7s %7s", "recording", "array", "az[deg]", "el[deg]",
                "p_d", "FAR[1/s]", "TL[s]", "TFR", "");
  o << line;
  for (const auto& s : jobs.front().metrics.ospa) o << " " << report::ospa_column(s);
  o << "\n";
  for (const auto& j : jobs) {
    const auto& m = j.metrics;
    std::snprintf(line, sizeof line, "%-22s %-14s %8s %8s %7s %8s %8s %7s %7s", j.key.recording.substr(0, 22).c_str(),
                  j.key.array.substr(0, 14).c_str(), f(m.az_error_mean_deg, "%.2f").c_str(),
                  f(m.el_error_mean_deg, "%.2f").c_str(), f(m.p_d, "%.3f").c_str(), f(m.far_recording, "%.2f").c_str(),
                  f(m.track_latency, "%.2f").c_str(), f(m.tfr, "%.3f").c_str(), "");
    o << line;
    for (const auto& s : m.ospa) {
      std::snprintf(line, sizeof line, " %*.2f", static_cast<int>(report::ospa_column(s).size()), s.mean);
      o << line;
    }
    o << "\n";
  }
  return o.str();
}

int cmd_evaluate(const Config& c) {
  validate_eval(c);
  if (c.truth.empty() || c.submission.empty()) throw UsageError("evaluate: --truth and --submission are required");
  if (c.truth.size() != c.submission.size())
    throw UsageError("evaluate: give one --submission per --truth (" + std::to_string(c.truth.size()) + " vs " +
                     std::to_string(c.submission.size()) + ")");
  if (c.output.empty()) throw UsageError("evaluate: --out is required");
  const auto layout = load_layout(c);

  // one recording per worker; results are written afterwards in input order
  const std::size_t n = c.truth.size();
  std::vector<EvalJob> jobs(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(c.jobs ? c.jobs : std::thread::hardware_concurrency(),
                                                           static_cast<unsigned>(n)));
  std::size_t next = 0;
  while (next < n) {
    std::vector<std::future<EvalJob>> running;
    const std::size_t batch_end = std::min(n, next + workers);
    for (std::size_t i = next; i < batch_end; ++i)
      running.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred, evaluate_one,
                                   c.truth[i], c.submission[i], std::cref(c), std::cref(layout)));
    for (std::size_t i = next; i < batch_end; ++i) jobs[i] = running[i - next].get();
    next = batch_end;
  }

  const fs::path dir(c.output);
  fs::create_directories(dir);
  std::vector<report::ReportKey> keys;
  std::vector<evaluate::MetricsReport> reports;
  json all = json::array();
  for (const auto& j : jobs) {
    keys.push_back(j.key);
    reports.push_back(j.metrics);
    json r = report::metrics_to_json(j.metrics);
    r["recording"] = j.key.recording;
    r["submission"] = j.key.submission;
    r["array"] = j.key.array;
    all.push_back(r);
  }
  corpus_io::detail::write_text(dir / "metrics.csv", report::metrics_csv(keys, reports));
  corpus_io::detail::write_text(dir / "metrics.json",
                                json({{"config", config_to_json(c)}, {"reports", all}}).dump(2) + "\n");
  if (c.ospa_series) {
    for (const auto& j : jobs) {
      const std::string name = n == 1 ? "ospa_series.csv" : "ospa_series_" + j.key.recording + ".csv";
      corpus_io::detail::write_text(dir / name, report::ospa_series_csv(j.clock, j.metrics));
    }
  }
  write_manifest(dir / "manifest.json", "evaluate", c, {{"truth", c.truth}, {"submission", c.submission}});
  std::cout << summary_table(jobs);
  return kExitOk;
}

int cmd_report(const Config& c, const std::vector<std::string>& inputs) {
  if (inputs.empty()) throw UsageError("report: give one or more metrics.json files or evaluate output directories");
  if (c.output.empty()) throw UsageError("report: --out is required");
  std::vector<report::ReportKey> keys;
  std::vector<evaluate::MetricsReport> reports;
  json rows = json::array();
  for (const auto& in : inputs) {
    fs::path p(in);
    if (fs::is_directory(p)) p /= "metrics.json";
    std::ifstream f(p);
    if (!f) throw LoadError(p.string(), "cannot open metrics report");
    json j;
    try {
      j = json::parse(f);
    } catch (const json::exception& e) {
      throw FormatError(p.string(), 0, e.what());
    }
    if (!j.contains("reports") || !j.at("reports").is_array()) throw FormatError(p.string(), 0, "missing 'reports' array");
    for (const auto& r : j.at("reports")) {
      reports.push_back(report::metrics_from_json(r, p.string()));
      keys.push_back({r.value("recording", ""), r.value("submission", ""), r.value("array", "")});
      rows.push_back(r);
    }
  }
  for (const auto& r : reports)
    if (report::csv_columns(r) != report::csv_columns(reports.front()))
      throw FormatError(inputs.front(), 0, "reports differ in OSPA configuration and cannot be merged");
  const auto agg = report::aggregate(reports);
  keys.push_back({"aggregate", "", ""});
  reports.push_back(agg);
  const fs::path dir(c.output);
  fs::create_directories(dir);
  corpus_io::detail::write_text(dir / "summary.csv", report::metrics_csv(keys, reports));
  json agg_json = report::metrics_to_json(agg);
  agg_json.erase("vaps");
  corpus_io::detail::write_text(dir / "summary.json",
                                json({{"reports", rows}, {"aggregate", agg_json}, {"recordings", rows.size()}}).dump(2) + "\n");
  write_manifest(dir / "manifest.json", "report", c, {{"inputs", inputs}});
  std::cout << "merged " << rows.size() << " report(s) -> " << (dir / "summary.csv").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------------------------
// Flags. Each flag overrides the config file only when given.

template <typename T>
struct Flag {
  T value{};
  CLI::Option* opt = nullptr;
  bool given() const { return opt && opt->count() > 0; }
  void apply(T& dst) const {
    if (given()) dst = value;
  }
};

struct PipelineFlags {
  Flag<std::string> localizer, tracker;
  Flag<std::size_t> n_sources, block_frames, block_hop, window, hop, particles;
  Flag<double> grid_res, band_lo, band_hi, t_miss, obs_std, backfill, peak_ratio;
  Flag<bool> azimuth_only, no_vad;
  Flag<std::uint64_t> tracker_seed;

  void add(CLI::App* app) {
    localizer.opt = app->add_option("--localizer", localizer.value, "gcc-phat | srp-phat | music | pseudo-intensity");
    tracker.opt = app->add_option("--tracker", tracker.value, "kalman | wrapped-kalman | particle");
    n_sources.opt = app->add_option("--n-sources", n_sources.value, "Peaks per block (MUSIC signal subspace size)");
    grid_res.opt = app->add_option("--grid-res", grid_res.value, "Grid resolution in degrees (0: default for the array)");
    azimuth_only.opt = app->add_flag("--azimuth-only", azimuth_only.value, "Search the horizontal plane only");
    window.opt = app->add_option("--window", window.value, "STFT window length (samples)");
    hop.opt = app->add_option("--hop", hop.value, "STFT hop (samples)");
    block_frames.opt = app->add_option("--block-frames", block_frames.value, "Frames per localization block");
    block_hop.opt = app->add_option("--block-hop", block_hop.value, "Frames between localization blocks");
    band_lo.opt = app->add_option("--band-lo", band_lo.value, "Lower band edge (Hz)");
    band_hi.opt = app->add_option("--band-hi", band_hi.value, "Upper band edge (Hz)");
    no_vad.opt = app->add_flag("--no-vad", no_vad.value, "Localize every block regardless of energy");
    peak_ratio.opt = app->add_option("--min-peak-ratio", peak_ratio.value, "Relative height for secondary peaks");
    t_miss.opt = app->add_option("--t-miss", t_miss.value, "Track termination timeout (s)");
    obs_std.opt = app->add_option("--obs-std", obs_std.value, "Observation noise std (deg)");
    backfill.opt = app->add_option("--backfill", backfill.value, "Emit this many seconds before track birth");
    particles.opt = app->add_option("--particles", particles.value, "Particle count");
    tracker_seed.opt = app->add_option("--tracker-seed", tracker_seed.value, "Particle filter seed");
  }

  void apply(Config& c) const {
    auto& p = c.pipeline;
    if (localizer.given()) p.localizer.kind = pipeline::localizer_from_name(localizer.value);
    if (tracker.given()) p.tracker.filter = track::filter_from_name(tracker.value);
    n_sources.apply(p.localizer.n_sources);
    grid_res.apply(p.localizer.grid_resolution_deg);
    azimuth_only.apply(p.localizer.azimuth_only);
    peak_ratio.apply(p.localizer.min_peak_ratio);
    window.apply(p.frontend.window_length);
    hop.apply(p.frontend.hop);
    block_frames.apply(p.frontend.block_frames);
    block_hop.apply(p.frontend.block_hop);
    band_lo.apply(p.frontend.band_lo_hz);
    band_hi.apply(p.frontend.band_hi_hz);
    if (no_vad.given()) p.frontend.vad = !no_vad.value;
    t_miss.apply(p.tracker.t_miss);
    if (obs_std.given()) p.tracker.obs_std = geometry::deg2rad(obs_std.value);
    backfill.apply(p.tracker.backfill_s);
    particles.apply(p.tracker.particles);
    tracker_seed.apply(p.tracker.seed);
  }
};

struct EvalFlags {
  Flag<double> gate, ospa_c;
  Flag<std::vector<double>> ospa_p;
  Flag<bool> pd_per_source, ospa_series;
  Flag<unsigned> jobs;

  void add(CLI::App* app) {
    gate.opt = app->add_option("--gate", gate.value, "Association gate (deg)");
    ospa_p.opt = app->add_option("--ospa-p", ospa_p.value, "OSPA orders, comma separated")->delimiter(',');
    ospa_c.opt = app->add_option("--ospa-c", ospa_c.value, "OSPA cutoff (deg)");
    pd_per_source.opt = app->add_flag("--pd-per-source", pd_per_source.value, "Average p_d over sources");
    ospa_series.opt = app->add_flag("--ospa-series", ospa_series.value, "Write the per-timestamp OSPA CSV");
    jobs.opt = app->add_option("--jobs", jobs.value, "Worker threads for multiple recordings");
  }

  void apply(Config& c) const {
    gate.apply(c.eval.gate_deg);
    ospa_p.apply(c.eval.ospa_orders);
    ospa_c.apply(c.eval.ospa_cutoff_deg);
    pd_per_source.apply(c.eval.pd_per_source);
    ospa_series.apply(c.ospa_series);
    jobs.apply(c.jobs);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"locata: sound source localization and tracking toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path;
  Flag<std::string> layout, out;
  Flag<double> speed;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file (flags override it)")->check(CLI::ExistingFile);
    layout.opt = sub->add_option("--layout", layout.value, "Corpus layout description (JSON)");
  };

  auto* sim = app.add_subcommand("simulate", "Synthesize a task scene in the recording layout");
  common(sim);
  Flag<int> task;
  Flag<std::uint64_t> seed;
  Flag<std::string> array, noise, format, rec_id;
  Flag<double> duration, snr, noise_rms, max_speed;
  task.opt = sim->add_option("--task", task.value, "Task 1-6");
  seed.opt = sim->add_option("--seed", seed.value, "Random seed");
  array.opt = sim->add_option("--array", array.value, "Array preset");
  duration.opt = sim->add_option("--duration", duration.value, "Duration (s)");
  snr.opt = sim->add_option("--snr", snr.value, "SNR at the reference microphone (dB)");
  noise.opt = sim->add_option("--noise", noise.value, "white | pink | none");
  noise_rms.opt = sim->add_option("--noise-rms", noise_rms.value, "Sensor noise rms");
  max_speed.opt = sim->add_option("--max-speed", max_speed.value, "Peak source speed (m/s)");
  format.opt = sim->add_option("--format", format.value, "float64 | float32 | pcm16 | pcm24 | pcm32");
  rec_id.opt = sim->add_option("--id", rec_id.value, "Recording id");
  std::string sim_out;
  sim->add_option("--out", sim_out, "Output directory")->required();
  speed.opt = sim->add_option("--speed-of-sound", speed.value, "m/s");

  auto* run = app.add_subcommand("run", "Localize and track a recording, writing a submission");
  common(run);
  std::string run_in, run_out;
  run->add_option("--in", run_in, "Recording directory")->required();
  run->add_option("--out", run_out, "Submission CSV")->required();
  PipelineFlags pflags;
  pflags.add(run);

  auto* ev = app.add_subcommand("evaluate", "Score submissions against ground truth");
  common(ev);
  std::vector<std::string> truth, subs;
  std::string ev_out;
  ev->add_option("--truth", truth, "Recording directory with ground truth (repeatable)")->required();
  ev->add_option("--submission", subs, "Submission CSV (repeatable, one per --truth)")->required();
  ev->add_option("--out", ev_out, "Report directory")->required();
  EvalFlags eflags;
  eflags.add(ev);

  auto* rep = app.add_subcommand("report", "Merge metrics reports into one table with an aggregate row");
  std::vector<std::string> rep_in;
  std::string rep_out;
  rep->add_option("inputs", rep_in, "metrics.json files or evaluate output directories")->required();
  rep->add_option("--out", rep_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    Config c;
    if (!config_path.empty()) load_config_file(c, config_path);
    layout.apply(c.layout);
    if (*sim) {
      task.apply(c.task);
      seed.apply(c.seed);
      array.apply(c.array);
      duration.apply(c.duration);
      snr.apply(c.snr_db);
      noise.apply(c.noise);
      noise_rms.apply(c.noise_rms);
      max_speed.apply(c.max_speed);
      format.apply(c.sample_format);
      rec_id.apply(c.recording_id);
      speed.apply(c.pipeline.speed_of_sound);
      c.output = sim_out;
      return cmd_simulate(c);
    }
    if (*run) {
      pflags.apply(c);
      c.input = run_in;
      c.output = run_out;
      return cmd_run(c);
    }
    if (*ev) {
      eflags.apply(c);
      c.truth = truth;
      c.submission = subs;
      c.output = ev_out;
      return cmd_evaluate(c);
    }
    if (*rep) {
      c.output = rep_out;
      return cmd_report(c, rep_in);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const ClockMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
