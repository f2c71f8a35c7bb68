// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "locata/corpus_io.hpp"
#include "locata/simulate.hpp"

using namespace locata;
namespace fs = corpus_io::fs;
using corpus_io::json;
using geometry::Doa;
using geometry::Mat3;
using geometry::Trajectory;
using geometry::Vec3;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("locata_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

/// Runs the CLI with the given arguments; stdout and stderr go to `log` when given.
int cli(const std::string& args, const fs::path& log = {}) {
  std::string cmd = std::string(LOCATA_CLI_PATH) + " " + args;
  cmd += log.empty() ? " >/dev/null 2>&1" : " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json load_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

/// Static sources on the robot head at whole-degree azimuths, so that disk rounding is exact.
simulate::Scene static_scene(const std::vector<double>& az_deg, double duration, std::vector<std::vector<Interval>> vaps) {
  simulate::SceneConfig cfg;
  cfg.duration = duration;
  cfg.seed = 11;
  cfg.array = geometry::presets::robot_head();
  cfg.array_trajectory = Trajectory::constant(Vec3::Zero(), Mat3::Identity(), 0.0, duration);
  for (std::size_t s = 0; s < az_deg.size(); ++s) {
    simulate::SourceSpec src;
    src.name = "talker" + std::to_string(s + 1);
    const double a = geometry::deg2rad(az_deg[s]);
    src.trajectory = Trajectory::constant(Vec3(2.5 * std::cos(a), 2.5 * std::sin(a), 0.0), Mat3::Identity(), 0.0, duration);
    src.vaps = vaps[s];
    src.snr_db = 20.0;
    cfg.sources.push_back(std::move(src));
  }
  return simulate::synthesize(cfg);
}

}  // namespace

TEST(CliSimulate, SameSeedGivesByteIdenticalDirectories) {
  TempDir d;
  ASSERT_EQ(cli("simulate --task 1 --seed 7 --duration 2 --out " + (d / "a").string()), 0);
  ASSERT_EQ(cli("simulate --task 1 --seed 7 --duration 2 --out " + (d / "b").string()), 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d / "a")) {
    const auto other = d / "b" / e.path().filename();
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(slurp(e.path()), slurp(other)) << e.path().filename();
    ++files;
  }
  EXPECT_EQ(files, 6u);  // audio, metadata, two position files, VAD, manifest
}

TEST(CliSimulate, InvalidTaskIsUsageError) {
  TempDir d;
  EXPECT_EQ(cli("simulate --task 9 --out " + (d / "x").string(), d / "log"), 1);
  EXPECT_NE(slurp(d / "log").find("task"), std::string::npos);
  EXPECT_FALSE(fs::exists(d / "x"));
  EXPECT_EQ(cli("simulate --task 1 --array nope --out " + (d / "x").string()), 1);
  EXPECT_EQ(cli("simulate --task 1 --bogus-flag --out " + (d / "x").string()), 1);
}

TEST(CliSimulate, DurationTenSecondsIs480000Samples) {
  TempDir d;
  ASSERT_EQ(cli("simulate --task 1 --array hearing_aids --duration 10 --out " + (d / "s").string()), 0);
  wav::WavInfo info;
  const auto audio = wav::read_wav((d / "s" / "audio_array_hearing_aids.wav").string(), &info);
  EXPECT_EQ(info.sample_rate, 48000u);
  EXPECT_EQ(audio.length(), 480000u);
  EXPECT_EQ(audio.channel_count(), 4u);
}

TEST(CliRun, SrpKalmanCoversEveryVapTimestamp) {
  TempDir d;
  ASSERT_EQ(cli("simulate --task 1 --seed 7 --duration 6 --out " + (d / "s").string()), 0);
  ASSERT_EQ(cli("run --in " + (d / "s").string() + " --localizer srp-phat --tracker kalman --out " +
                (d / "sub.csv").string()),
            0);
  const auto gt = corpus_io::read_recording(d / "s").ground_truth();
  const auto sub = corpus_io::read_submission(d / "sub.csv");
  std::set<long long> stamps;
  for (const auto& e : sub) stamps.insert(std::llround(e.timestamp * 1e6));
  std::size_t vap_stamps = 0;
  for (std::size_t k = 0; k < gt.clock.size(); ++k) {
    if (!gt.vaps.active(0, gt.clock[k])) continue;
    ++vap_stamps;
    EXPECT_TRUE(stamps.count(std::llround(gt.clock[k] * 1e6))) << "no estimate at t=" << gt.clock[k];
  }
  EXPECT_GT(vap_stamps, 100u);
  EXPECT_TRUE(fs::exists(d / "sub.csv.manifest.json"));
}

TEST(CliRun, MusicTwoSourcesGivesTwoIds) {
  TempDir d;
  const auto scene = static_scene({-60.0, 70.0}, 4.0, {{{0.2, 3.8}}, {{0.2, 3.8}}});
  corpus_io::write_scene(scene, d / "s", "two");
  ASSERT_EQ(cli("run --in " + (d / "s").string() + " --localizer music --n-sources 2 --out " + (d / "sub.csv").string()), 0);
  const auto sub = corpus_io::read_submission(d / "sub.csv");
  std::set<int> ids;
  for (const auto& e : sub) ids.insert(e.source_id);
  EXPECT_EQ(ids.size(), 2u);
}

TEST(CliRun, MissingInputIsDataError) {
  TempDir d;
  EXPECT_EQ(cli("run --in " + (d / "nowhere").string() + " --out " + (d / "x.csv").string()), 2);
  EXPECT_EQ(cli("run --out " + (d / "x.csv").string()), 1);
}

TEST(CliRun, PseudoIntensityOnDicitRejectedBeforeProcessing) {
  TempDir d;
  ASSERT_EQ(cli("simulate --task 1 --array dicit --duration 1 --out " + (d / "s").string()), 0);
  EXPECT_EQ(cli("run --in " + (d / "s").string() + " --localizer pseudo-intensity --out " + (d / "x.csv").string(),
                d / "log"),
            1);
  EXPECT_NE(slurp(d / "log").find("spherical"), std::string::npos);
  EXPECT_FALSE(fs::exists(d / "x.csv"));
}

TEST(CliRun, ConfigFileThenFlagsPrecedence) {
  TempDir d;
  ASSERT_EQ(cli("simulate --task 1 --array hearing_aids --duration 1.5 --out " + (d / "s").string()), 0);
  {
    std::ofstream cfg(d / "cfg.json");
    cfg << R"({"localizer": {"name": "music", "grid_resolution_deg": 5}, "tracker": {"t_miss_s": 0.7}})";
  }
  ASSERT_EQ(cli("run --config " + (d / "cfg.json").string() + " --in " + (d / "s").string() + " --out " +
                (d / "a.csv").string()),
            0);
  ASSERT_EQ(cli("run --config " + (d / "cfg.json").string() + " --localizer srp --in " + (d / "s").string() +
                " --out " + (d / "b.csv").string()),
            0);
  const auto a = load_json(d / "a.csv.manifest.json")["config"];
  const auto b = load_json(d / "b.csv.manifest.json")["config"];
  EXPECT_EQ(a["localizer"]["name"], "music");
  EXPECT_EQ(b["localizer"]["name"], "srp-phat");
  EXPECT_EQ(a["localizer"]["grid_resolution_deg"], 5.0);
  EXPECT_EQ(b["localizer"]["grid_resolution_deg"], 5.0);
  EXPECT_EQ(b["tracker"]["t_miss_s"], 0.7);
  EXPECT_EQ(a["tracker"]["gate_sigma"], 3.0);  // untouched default
  EXPECT_NE(load_json(d / "a.csv.manifest.json")["config_hash"], load_json(d / "b.csv.manifest.json")["config_hash"]);

  std::ofstream(d / "bad.json") << R"({"tracker": {"nmae": "kalman"}})";
  EXPECT_EQ(cli("run --config " + (d / "bad.json").string() + " --in " + (d / "s").string() + " --out " +
                (d / "c.csv").string()),
            1);
  std::ofstream(d / "range.json") << R"({"tracker": {"confirm_hits": 7, "confirm_window": 5}})";
  EXPECT_EQ(cli("run --config " + (d / "range.json").string() + " --in " + (d / "s").string() + " --out " +
                (d / "c.csv").string()),
            1);
}

TEST(CliEvaluate, SelfEvaluationIsPerfect) {
  TempDir d;
  const auto scene = static_scene({40.0, -135.0}, 3.0, {{{0.3, 1.4}, {2.0, 2.8}}, {{0.5, 2.5}}});
  corpus_io::write_scene(scene, d / "s", "self");
  const auto gt = corpus_io::read_recording(d / "s").ground_truth();
  corpus_io::write_submission(d / "truth.csv", evaluate::truth_as_submission(gt));
  ASSERT_EQ(cli("evaluate --truth " + (d / "s").string() + " --submission " + (d / "truth.csv").string() +
                " --ospa-series --out " + (d / "r").string()),
            0);
  const auto r = load_json(d / "r" / "metrics.json")["reports"][0];
  EXPECT_EQ(r["p_d"], 1.0);
  EXPECT_NEAR(r["az_error_mean_deg"].get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(r["el_error_mean_deg"].get<double>(), 0.0, 1e-9);
  EXPECT_EQ(r["far_recording"], 0.0);
  EXPECT_EQ(r["tfr"], 0.0);
  EXPECT_EQ(r["track_latency_s"], 0.0);
  for (const auto& o : r["ospa"]) EXPECT_NEAR(o["mean_deg"].get<double>(), 0.0, 1e-9);
  std::ifstream series(d / "r" / "ospa_series.csv");
  std::string line;
  std::getline(series, line);
  EXPECT_EQ(line, "timestamp,ospa_p1_c30_deg,ospa_p5_c30_deg");
  std::size_t rows = 0;
  while (std::getline(series, line)) {
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    EXPECT_NEAR(std::stod(line.substr(c1 + 1, c2 - c1 - 1)), 0.0, 1e-9);
    EXPECT_NEAR(std::stod(line.substr(c2 + 1)), 0.0, 1e-9);
    ++rows;
  }
  EXPECT_EQ(rows, gt.clock.size());
}

TEST(CliEvaluate, FiveDegreeBiasGivesFiveDegreeError) {
  TempDir d;
  const auto scene = static_scene({40.0}, 2.0, {{{0.3, 1.6}}});
  corpus_io::write_scene(scene, d / "s", "bias");
  const auto gt = corpus_io::read_recording(d / "s").ground_truth();
  auto sub = evaluate::truth_as_submission(gt);
  for (auto& e : sub) e.doa = Doa(e.doa.azimuth() + geometry::deg2rad(5.0), e.doa.elevation());
  corpus_io::write_submission(d / "bias.csv", sub);
  ASSERT_EQ(cli("evaluate --truth " + (d / "s").string() + " --submission " + (d / "bias.csv").string() + " --out " +
                (d / "r").string()),
            0);
  const auto r = load_json(d / "r" / "metrics.json")["reports"][0];
  EXPECT_NEAR(r["az_error_mean_deg"].get<double>(), 5.0, 1e-9);
  EXPECT_EQ(r["p_d"], 1.0);
}

TEST(CliEvaluate, OspaColumnsAndReportMerge) {
  TempDir d;
  const auto scene = static_scene({10.0}, 1.5, {{{0.2, 1.2}}});
  corpus_io::write_scene(scene, d / "s", "cols");
  const auto gt = corpus_io::read_recording(d / "s").ground_truth();
  corpus_io::write_submission(d / "t.csv", evaluate::truth_as_submission(gt));
  ASSERT_EQ(cli("evaluate --truth " + (d / "s").string() + " --submission " + (d / "t.csv").string() +
                " --ospa-p 1,5 --ospa-c 30 --out " + (d / "r").string()),
            0);
  std::ifstream csv(d / "r" / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_NE(header.find("ospa_p1_c30_mean_deg"), std::string::npos);
  EXPECT_NE(header.find("ospa_p5_c30_mean_deg"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "r" / "manifest.json"));

  ASSERT_EQ(cli("report " + (d / "r").string() + " " + (d / "r" / "metrics.json").string() + " --out " +
                (d / "m").string()),
            0);
  const auto merged = load_json(d / "m" / "summary.json");
  EXPECT_EQ(merged["recordings"], 2);
  EXPECT_EQ(merged["aggregate"]["p_d"], 1.0);
  EXPECT_EQ(merged["aggregate"]["timestamps"], 2 * gt.clock.size());
}

TEST(CliEvaluate, ClockMismatchNamesTimestamp) {
  TempDir d;
  const auto scene = static_scene({10.0}, 1.0, {{{0.2, 0.8}}});
  corpus_io::write_scene(scene, d / "s", "clock");
  std::ofstream(d / "off.csv") << "timestamp,source_id,azimuth_deg,elevation_deg\n0.5041,1,10,90\n";
  EXPECT_EQ(cli("evaluate --truth " + (d / "s").string() + " --submission " + (d / "off.csv").string() + " --out " +
                    (d / "r").string(),
                d / "log"),
            2);
  EXPECT_NE(slurp(d / "log").find("0.5041"), std::string::npos) << slurp(d / "log");
}
