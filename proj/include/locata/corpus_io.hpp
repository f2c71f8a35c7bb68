// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// On-disk recording layout and submission files. Angles are degrees on disk and radians in
// memory. Column layouts are driven by a layout description (see formats/ and FORMATS.md).

#pragma once

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "locata/error.hpp"
#include "locata/evaluate.hpp"
#include "locata/geometry.hpp"
#include "locata/localize.hpp"
#include "locata/simulate.hpp"
#include "locata/vap.hpp"
#include "locata/wav.hpp"

namespace locata::corpus_io {

namespace fs = std::filesystem;
using geometry::ArrayGeometry;
using geometry::Mat3;
using geometry::Pose;
using geometry::Trajectory;
using geometry::Vec3;
using localize::DoaEstimate;
using json = nlohmann::json;

inline constexpr double kExpectedSampleRate = 48000.0;

// Kept identical to formats/layout.json; a unit test enforces it.
inline constexpr const char* kDefaultLayoutJson = R"({
  "name": "locata-kit",
  "files": {
    "metadata": "metadata.json",
    "audio": "audio_array_{array}.wav",
    "array_position": "position_array_{array}.txt",
    "source_position": "position_source_{source}.txt",
    "vad": "VAD_{array}_{source}.txt"
  },
  "position": {
    "default_columns": ["time", "x", "y", "z", "r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33"],
    "time": [["time", 1.0]],
    "translation": ["x", "y", "z"],
    "rotation": ["r11", "r12", "r13", "r21", "r22", "r23", "r31", "r32", "r33"],
    "time_origin": "zero"
  },
  "vad": {
    "kind": "intervals",
    "default_columns": ["start", "end"],
    "start": "start",
    "end": "end"
  },
  "array_aliases": {
    "benchmark2": "robot_head",
    "dummy": "hearing_aids"
  }
})";

/// Parsed layout description.
struct Layout {
  std::string name;
  std::string metadata_file, audio_file, array_position_file, source_position_file, vad_file;
  std::vector<std::string> position_columns;
  std::vector<std::pair<std::string, double>> time_terms;
  std::array<std::string, 3> translation;
  std::array<std::string, 9> rotation;
  bool origin_at_array_start = false;
  bool vad_samples = false;
  std::vector<std::string> vad_columns;
  std::string vad_start, vad_end, vad_value;
  std::map<std::string, std::string> array_aliases;

  static Layout from_json(const json& j, const std::string& origin = "<layout>") {
    try {
      Layout l;
      l.name = j.value("name", "");
      const auto& f = j.at("files");
      l.metadata_file = f.at("metadata").get<std::string>();
      l.audio_file = f.at("audio").get<std::string>();
      l.array_position_file = f.at("array_position").get<std::string>();
      l.source_position_file = f.at("source_position").get<std::string>();
      l.vad_file = f.at("vad").get<std::string>();
      const auto& p = j.at("position");
      l.position_columns = p.at("default_columns").get<std::vector<std::string>>();
      for (const auto& t : p.at("time")) l.time_terms.emplace_back(t.at(0).get<std::string>(), t.at(1).get<double>());
      const auto tr = p.at("translation").get<std::vector<std::string>>();
      const auto rot = p.at("rotation").get<std::vector<std::string>>();
      if (tr.size() != 3 || rot.size() != 9) throw FormatError(origin, 0, "translation needs 3 and rotation 9 columns");
      std::copy(tr.begin(), tr.end(), l.translation.begin());
      std::copy(rot.begin(), rot.end(), l.rotation.begin());
      const auto orig = p.value("time_origin", "zero");
      if (orig != "zero" && orig != "array_start") throw FormatError(origin, 0, "unknown time_origin '" + orig + "'");
      l.origin_at_array_start = orig == "array_start";
      const auto& v = j.at("vad");
      const auto kind = v.at("kind").get<std::string>();
      if (kind != "intervals" && kind != "samples") throw FormatError(origin, 0, "unknown vad kind '" + kind + "'");
      l.vad_samples = kind == "samples";
      l.vad_columns = v.at("default_columns").get<std::vector<std::string>>();
      l.vad_start = v.value("start", "start");
      l.vad_end = v.value("end", "end");
      l.vad_value = v.value("value", "VAD");
      if (j.contains("array_aliases")) l.array_aliases = j.at("array_aliases").get<std::map<std::string, std::string>>();
      return l;
    } catch (const json::exception& e) {
      throw FormatError(origin, 0, std::string("invalid layout: ") + e.what());
    }
  }

  static const Layout& default_layout() {
    static const Layout l = from_json(json::parse(kDefaultLayoutJson), "<builtin layout>");
    return l;
  }

  static Layout load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(path, "cannot open layout file");
    try {
      return from_json(json::parse(in), path);
    } catch (const json::parse_error& e) {
      throw FormatError(path, 0, e.what());
    }
  }
};

inline std::string expand(std::string pattern, const std::string& key, const std::string& value) {
  const std::string token = "{" + key + "}";
  for (auto p = pattern.find(token); p != std::string::npos; p = pattern.find(token, p + value.size()))
    pattern.replace(p, token.size(), value);
  return pattern;
}

// ---------------------------------------------------------------------------------------------
// Text tables

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ' ' || ch == '\t' || ch == ',' || ch == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (b != e && *b == '+') ++b;
  const auto r = std::from_chars(b, e, v);
  if (r.ec != std::errc() || r.ptr != e) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Numeric table with named columns. A header is recognized when the first data line has a
/// non-numeric field; otherwise default_columns name the columns.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t column(const std::string& name, const std::string& path) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return i;
    throw FormatError(path, 0, "missing column '" + name + "'");
  }
};

inline Table read_table(const std::string& path, const std::vector<std::string>& default_columns) {
  std::ifstream in(path);
  if (!in) throw LoadError(path, "cannot open file");
  Table t;
  std::string line;
  std::size_t no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (first) {
      first = false;
      if (!parse_double(fields[0])) {
        t.columns = std::move(fields);
        continue;
      }
      t.columns = default_columns;
    }
    if (fields.size() != t.columns.size())
      throw FormatError(path, no, "expected " + std::to_string(t.columns.size()) + " fields, found " +
                                      std::to_string(fields.size()));
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const auto v = parse_double(fields[i]);
      if (!v || !std::isfinite(*v)) throw FormatError(path, no, "not a finite number: '" + fields[i] + "'");
      row[i] = *v;
    }
    t.rows.push_back(std::move(row));
    t.line_numbers.push_back(no);
  }
  if (first) t.columns = default_columns;
  return t;
}

inline void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError(path.string(), "cannot open for writing");
  out << content;
  if (!out) throw LoadError(path.string(), "write failed");
}

}  // namespace detail

/// Positional table to a trajectory. time_offset is subtracted from every timestamp.
inline Trajectory read_positions(const std::string& path, const Layout& layout = Layout::default_layout(),
                                 double time_offset = 0.0) {
  const auto t = detail::read_table(path, layout.position_columns);
  std::vector<std::pair<std::size_t, double>> time_idx;
  for (const auto& [name, scale] : layout.time_terms) time_idx.emplace_back(t.column(name, path), scale);
  std::array<std::size_t, 3> ti{};
  std::array<std::size_t, 9> ri{};
  for (std::size_t i = 0; i < 3; ++i) ti[i] = t.column(layout.translation[i], path);
  for (std::size_t i = 0; i < 9; ++i) ri[i] = t.column(layout.rotation[i], path);
  if (t.rows.empty()) throw FormatError(path, 0, "no positional samples");
  std::vector<Pose> poses;
  poses.reserve(t.rows.size());
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& r = t.rows[k];
    double time = 0.0;
    for (const auto& [i, s] : time_idx) time += r[i] * s;
    time -= time_offset;
    Mat3 rot;
    for (std::size_t i = 0; i < 9; ++i) rot(static_cast<Eigen::Index>(i / 3), static_cast<Eigen::Index>(i % 3)) = r[ri[i]];
    if (!poses.empty() && !(time > poses.back().timestamp()))
      throw FormatError(path, t.line_numbers[k], "timestamps must increase");
    if (!geometry::is_rotation(rot, 1e-4)) throw FormatError(path, t.line_numbers[k], "rotation matrix is not orthonormal");
    poses.emplace_back(Vec3(r[ti[0]], r[ti[1]], r[ti[2]]), geometry::is_rotation(rot) ? rot : geometry::orthonormalize(rot),
                       time);
  }
  // nominal rate from the median spacing
  double rate = geometry::kDefaultTrajectoryRate;
  if (poses.size() > 1) {
    std::vector<double> d;
    for (std::size_t k = 1; k < poses.size(); ++k) d.push_back(poses[k].timestamp() - poses[k - 1].timestamp());
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2), d.end());
    rate = 1.0 / d[d.size() / 2];
  }
  return Trajectory(std::move(poses), rate);
}

inline void write_positions(const fs::path& path, const Trajectory& traj) {
  std::string s = "time x y z r11 r12 r13 r21 r22 r23 r31 r32 r33\n";
  for (const auto& p : traj.samples()) {
    s += detail::format_double(p.timestamp());
    for (int i = 0; i < 3; ++i) s += ' ' + detail::format_double(p.translation()(i));
    for (int i = 0; i < 9; ++i) s += ' ' + detail::format_double(p.rotation()(i / 3, i % 3));
    s += '\n';
  }
  detail::write_text(path, s);
}

/// VAP list of one source. For per-sample labels, sample_rate_hz converts indices to seconds.
inline std::vector<Interval> read_vad(const std::string& path, const Layout& layout = Layout::default_layout(),
                                      double sample_rate_hz = kExpectedSampleRate, double time_offset = 0.0) {
  const auto t = detail::read_table(path, layout.vad_columns);
  std::vector<Interval> out;
  if (layout.vad_samples) {
    const auto c = t.column(layout.vad_value, path);
    std::optional<std::size_t> run;
    for (std::size_t i = 0; i <= t.rows.size(); ++i) {
      const bool on = i < t.rows.size() && t.rows[i][c] > 0.5;
      if (on && !run) run = i;
      if (!on && run) {
        const double a = static_cast<double>(*run) / sample_rate_hz - time_offset;
        const double b = static_cast<double>(i - 1) / sample_rate_hz - time_offset;
        if (b > a) out.push_back({a, b});
        run.reset();
      }
    }
    return out;
  }
  const auto cs = t.column(layout.vad_start, path), ce = t.column(layout.vad_end, path);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const Interval iv{t.rows[k][cs] - time_offset, t.rows[k][ce] - time_offset};
    if (!(iv.end > iv.start)) throw FormatError(path, t.line_numbers[k], "period end must follow its start");
    if (!out.empty() && !(iv.start > out.back().end))
      throw FormatError(path, t.line_numbers[k], "periods overlap or are unordered");
    out.push_back(iv);
  }
  return out;
}

inline void write_vad(const fs::path& path, const std::vector<Interval>& vaps) {
  std::string s = "start end\n";
  for (const auto& v : vaps) s += detail::format_double(v.start) + ' ' + detail::format_double(v.end) + '\n';
  detail::write_text(path, s);
}

// ---------------------------------------------------------------------------------------------
// Recordings

struct RecordingMetadata {
  std::string recording_id;
  int task = 0;
  std::string array_name;
  std::string split = "dev";  // "dev" carries source positions and VAD labels, "eval" does not
  std::vector<std::string> source_names;
  double speed_of_sound = geometry::kDefaultSpeedOfSound;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<Vec3>> mics;  // overrides the preset geometry when present
};

struct RecordingBundle {
  RecordingMetadata metadata;
  sigproc::MultichannelAudio audio;
  ArrayGeometry array;
  Trajectory array_trajectory;
  std::optional<std::vector<Trajectory>> source_trajectories;
  std::optional<VapTable> vaps;  // as labelled, before propagation alignment
  std::vector<std::string> warnings;

  bool has_ground_truth() const { return source_trajectories.has_value() && vaps.has_value(); }

  /// Evaluation reference on the array's positional clock, VAPs aligned at the array.
  evaluate::GroundTruth ground_truth() const {
    if (!has_ground_truth()) throw LoadError(metadata.recording_id, "recording has no source ground truth (eval split)");
    return evaluate::make_ground_truth(*source_trajectories, metadata.source_names, *vaps, array_trajectory,
                                       metadata.speed_of_sound, true, array.centroid());
  }
};

inline json metadata_to_json(const RecordingMetadata& m) {
  json j;
  j["format_version"] = 1;
  j["recording_id"] = m.recording_id;
  j["task"] = m.task;
  j["array"] = m.array_name;
  j["split"] = m.split;
  j["sources"] = m.source_names;
  j["speed_of_sound"] = m.speed_of_sound;
  if (m.seed) j["seed"] = *m.seed;
  if (m.mics) {
    json mics = json::array();
    for (const auto& p : *m.mics) mics.push_back({p.x(), p.y(), p.z()});
    j["mics"] = mics;
  }
  return j;
}

inline RecordingMetadata metadata_from_json(const json& j, const std::string& path) {
  try {
    RecordingMetadata m;
    m.recording_id = j.value("recording_id", "");
    m.task = j.value("task", 0);
    m.array_name = j.at("array").get<std::string>();
    m.split = j.value("split", "dev");
    if (m.split != "dev" && m.split != "eval") throw FormatError(path, 0, "split must be 'dev' or 'eval'");
    m.source_names = j.value("sources", std::vector<std::string>{});
    m.speed_of_sound = j.value("speed_of_sound", geometry::kDefaultSpeedOfSound);
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mics")) {
      std::vector<Vec3> mics;
      for (const auto& p : j.at("mics")) mics.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
      m.mics = std::move(mics);
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(path, 0, std::string("invalid metadata: ") + e.what());
  }
}

namespace detail {

/// Values of {key} for files in dir matching pattern.
inline std::vector<std::string> match_pattern(const fs::path& dir, const std::string& pattern, const std::string& key) {
  const std::string token = "{" + key + "}";
  const auto p = pattern.find(token);
  if (p == std::string::npos) return {};
  const std::string prefix = pattern.substr(0, p), suffix = pattern.substr(p + token.size());
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string n = e.path().filename().string();
    if (n.size() > prefix.size() + suffix.size() && n.starts_with(prefix) && n.ends_with(suffix)) {
      const std::string v = n.substr(prefix.size(), n.size() - prefix.size() - suffix.size());
      if (v.find('{') == std::string::npos) out.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline ArrayGeometry resolve_geometry(const RecordingMetadata& m, const Layout& layout) {
  if (m.mics) return ArrayGeometry(m.array_name, *m.mics);
  const auto it = layout.array_aliases.find(m.array_name);
  return geometry::presets::by_name(it == layout.array_aliases.end() ? m.array_name : it->second);
}

}  // namespace detail

inline RecordingBundle read_recording(const fs::path& dir, const Layout& layout = Layout::default_layout()) {
  if (!fs::is_directory(dir)) throw LoadError(dir.string(), "not a directory");
  RecordingBundle b;
  const fs::path meta_path = dir / layout.metadata_file;
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    try {
      b.metadata = metadata_from_json(json::parse(in), meta_path.string());
    } catch (const json::parse_error& e) {
      throw FormatError(meta_path.string(), 0, e.what());
    }
  } else {
    // infer from file names
    const auto arrays = detail::match_pattern(dir, layout.audio_file, "array");
    if (arrays.size() != 1)
      throw LoadError((dir / layout.metadata_file).string(),
                      "missing, and the array cannot be inferred from audio file names");
    b.metadata.array_name = arrays.front();
    b.metadata.recording_id = dir.filename().string();
    b.metadata.source_names = detail::match_pattern(dir, layout.source_position_file, "source");
    b.metadata.split = b.metadata.source_names.empty() ? "eval" : "dev";
  }
  const auto& m = b.metadata;
  b.array = detail::resolve_geometry(m, layout);

  const fs::path audio_path = dir / expand(layout.audio_file, "array", m.array_name);
  if (!fs::exists(audio_path)) throw LoadError(audio_path.string(), "missing audio file");
  b.audio = wav::read_wav(audio_path.string());
  if (b.audio.channel_count() != b.array.mic_count())
    throw FormatError(audio_path.string(), 0,
                      "audio has " + std::to_string(b.audio.channel_count()) + " channels but array '" + b.array.name() +
                          "' has " + std::to_string(b.array.mic_count()) + " microphones");
  if (b.audio.sample_rate_hz != kExpectedSampleRate)
    b.warnings.push_back(audio_path.string() + ": sample rate " + std::to_string(b.audio.sample_rate_hz) +
                         " Hz differs from the expected 48000 Hz");

  const fs::path arr_path = dir / expand(layout.array_position_file, "array", m.array_name);
  if (!fs::exists(arr_path)) throw LoadError(arr_path.string(), "missing array position file");
  double offset = 0.0;
  if (layout.origin_at_array_start) offset = read_positions(arr_path.string(), layout).start_time();
  b.array_trajectory = read_positions(arr_path.string(), layout, offset);

  if (m.split == "dev") {
    std::vector<Trajectory> trajs;
    VapTable vaps;
    for (const auto& s : m.source_names) {
      const fs::path sp = dir / expand(layout.source_position_file, "source", s);
      if (!fs::exists(sp)) throw LoadError(sp.string(), "missing source position file");
      trajs.push_back(read_positions(sp.string(), layout, offset));
      const fs::path vp = dir / expand(expand(layout.vad_file, "array", m.array_name), "source", s);
      if (!fs::exists(vp)) throw LoadError(vp.string(), "missing VAD file");
      vaps.sources.push_back(read_vad(vp.string(), layout, b.audio.sample_rate_hz, layout.vad_samples ? 0.0 : offset));
    }
    b.source_trajectories = std::move(trajs);
    b.vaps = std::move(vaps);
  }
  return b;
}

/// Writes a bundle in the default layout.
inline void write_recording(const RecordingBundle& b, const fs::path& dir,
                            wav::SampleFormat fmt = wav::SampleFormat::Float64) {
  const Layout& layout = Layout::default_layout();
  fs::create_directories(dir);
  auto meta = b.metadata;
  if (!meta.mics) meta.mics = b.array.mic_positions();
  detail::write_text(dir / layout.metadata_file, metadata_to_json(meta).dump(2) + "\n");
  wav::write_wav((dir / expand(layout.audio_file, "array", meta.array_name)).string(), b.audio, fmt);
  write_positions(dir / expand(layout.array_position_file, "array", meta.array_name), b.array_trajectory);
  if (meta.split == "dev") {
    if (!b.has_ground_truth()) throw ArgumentError("write_recording: dev split needs source trajectories and VAPs");
    if (b.source_trajectories->size() != meta.source_names.size() || b.vaps->source_count() != meta.source_names.size())
      throw ArgumentError("write_recording: one trajectory and VAP list per source name is required");
    for (std::size_t n = 0; n < meta.source_names.size(); ++n) {
      const auto& s = meta.source_names[n];
      write_positions(dir / expand(layout.source_position_file, "source", s), (*b.source_trajectories)[n]);
      write_vad(dir / expand(expand(layout.vad_file, "array", meta.array_name), "source", s), b.vaps->sources[n]);
    }
  }
}

inline RecordingBundle bundle_from_scene(const simulate::Scene& scene, std::string recording_id = "sim") {
  RecordingBundle b;
  b.metadata.recording_id = std::move(recording_id);
  b.metadata.task = scene.config.task;
  b.metadata.array_name = scene.array.name();
  b.metadata.split = "dev";
  b.metadata.source_names = scene.source_names;
  b.metadata.speed_of_sound = scene.config.speed_of_sound;
  b.metadata.seed = scene.config.seed;
  b.metadata.mics = scene.array.mic_positions();
  b.audio = scene.audio;
  b.array = scene.array;
  b.array_trajectory = scene.array_trajectory;
  b.source_trajectories = scene.source_trajectories;
  b.vaps = scene.vaps;
  return b;
}

inline void write_scene(const simulate::Scene& scene, const fs::path& dir, std::string recording_id = "sim") {
  write_recording(bundle_from_scene(scene, std::move(recording_id)), dir);
}

// ---------------------------------------------------------------------------------------------
// Submissions

inline constexpr const char* kSubmissionHeader = "timestamp,source_id,azimuth_deg,elevation_deg";

namespace detail {

/// Degrees rounded to 6 decimals and kept in [-180, 180).
inline double disk_azimuth(double rad) {
  double d = std::round(geometry::rad2deg(geometry::wrap_angle(rad)) * 1e6) / 1e6;
  if (d >= 180.0) d -= 360.0;
  return d;
}

}  // namespace detail

inline void write_submission(const fs::path& path, std::span<const DoaEstimate> estimates) {
  std::string s = std::string(kSubmissionHeader) + "\n";
  char buf[160];
  std::set<std::pair<long long, int>> seen;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const auto& e = estimates[i];
    if (i > 0 && e.timestamp < estimates[i - 1].timestamp)
      throw ArgumentError("write_submission: estimates must be time-ordered");
    if (e.source_id < 1) throw ArgumentError("write_submission: source ids start at 1");
    if (!std::isfinite(e.timestamp)) throw ArgumentError("write_submission: non-finite timestamp");
    if (!seen.emplace(std::llround(e.timestamp * 1e9), e.source_id).second)
      throw ArgumentError("write_submission: duplicate (timestamp, id) row");
    if (e.has_elevation) {
      std::snprintf(buf, sizeof buf, "%.9f,%d,%.6f,%.6f\n", e.timestamp, e.source_id, detail::disk_azimuth(e.doa.azimuth()),
                    geometry::rad2deg(e.doa.elevation()));
    } else {
      std::snprintf(buf, sizeof buf, "%.9f,%d,%.6f,\n", e.timestamp, e.source_id, detail::disk_azimuth(e.doa.azimuth()));
    }
    s += buf;
  }
  detail::write_text(path, s);
}

inline std::vector<DoaEstimate> read_submission(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), "cannot open submission");
  const std::string p = path.string();
  std::vector<DoaEstimate> out;
  std::set<std::pair<long long, int>> seen;
  std::string line;
  std::size_t no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line.rfind("timestamp", 0) == 0) continue;
    }
    // comma-separated, keeping an empty trailing elevation field
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
      if (ch == ',') {
        f.push_back(cur);
        cur.clear();
      } else if (ch != ' ' && ch != '\t') {
        cur.push_back(ch);
      }
    }
    f.push_back(cur);
    if (f.size() == 1) f = detail::split_fields(line);  // whitespace-delimited variant
    if (f.size() < 3 || f.size() > 4) throw FormatError(p, no, "expected 3 or 4 fields");
    const auto t = detail::parse_double(f[0]);
    const auto a = detail::parse_double(f[2]);
    int id = 0;
    const auto r = std::from_chars(f[1].data(), f[1].data() + f[1].size(), id);
    if (!t || !std::isfinite(*t)) throw FormatError(p, no, "bad timestamp '" + f[0] + "'");
    if (r.ec != std::errc() || r.ptr != f[1].data() + f[1].size()) throw FormatError(p, no, "bad source id '" + f[1] + "'");
    if (id < 1) throw FormatError(p, no, "source ids start at 1");
    if (!a || !(*a >= -180.0 && *a < 180.0)) throw FormatError(p, no, "azimuth must lie in [-180, 180)");
    DoaEstimate e;
    e.timestamp = *t;
    e.source_id = id;
    e.score = 1.0;
    double el = 90.0;
    e.has_elevation = f.size() == 4 && !f[3].empty();
    if (e.has_elevation) {
      const auto v = detail::parse_double(f[3]);
      if (!v || !(*v >= 0.0 && *v <= 180.0)) throw FormatError(p, no, "elevation must lie in [0, 180]");
      el = *v;
    }
    e.doa = geometry::Doa(geometry::deg2rad(*a), geometry::deg2rad(el));
    if (!out.empty() && e.timestamp < out.back().timestamp) throw FormatError(p, no, "timestamps must not decrease");
    if (!seen.emplace(std::llround(e.timestamp * 1e9), id).second)
      throw FormatError(p, no, "duplicate (timestamp, id) row");
    out.push_back(e);
  }
  return out;
}

}  // namespace locata::corpus_io
