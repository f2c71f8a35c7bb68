// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Metrics reports as JSON and CSV tables.

#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "locata/error.hpp"
#include "locata/evaluate.hpp"

namespace locata::report {

using json = nlohmann::json;
using evaluate::MetricsReport;
using evaluate::OspaSummary;

/// Identifies the row a report belongs to.
struct ReportKey {
  std::string recording;
  std::string submission;
  std::string array;
};

namespace detail {

inline json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline std::optional<double> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string cell(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// Column stem for one OSPA configuration, e.g. "ospa_p5_c30".
inline std::string ospa_column(const OspaSummary& s) {
  return "ospa_p" + detail::num(s.order) + "_c" + detail::num(s.cutoff_deg);
}

inline json metrics_to_json(const MetricsReport& r) {
  json j;
  j["timestamps"] = r.timestamps;
  j["valid_pairs"] = r.valid_pairs;
  j["false_estimates"] = r.false_estimates;
  j["false_in_vap"] = r.false_in_vap;
  j["missed"] = r.missed;
  j["breaks"] = r.breaks;
  j["swaps"] = r.swaps;
  j["undetected_vaps"] = r.undetected_vaps;
  j["recording_duration_s"] = r.recording_duration;
  j["vap_duration_s"] = r.vap_duration;
  j["az_error_mean_deg"] = detail::opt(r.az_error_mean_deg);
  j["az_error_std_deg"] = detail::opt(r.az_error_std_deg);
  j["el_error_mean_deg"] = detail::opt(r.el_error_mean_deg);
  j["el_error_std_deg"] = detail::opt(r.el_error_std_deg);
  j["p_d"] = detail::opt(r.p_d);
  json per = json::array();
  for (const auto& v : r.p_d_per_source) per.push_back(detail::opt(v));
  j["p_d_per_source"] = per;
  j["far_recording"] = detail::opt(r.far_recording);
  j["far_vap"] = detail::opt(r.far_vap);
  j["track_latency_s"] = detail::opt(r.track_latency);
  j["tfr"] = detail::opt(r.tfr);
  json ospa = json::array();
  for (const auto& s : r.ospa)
    ospa.push_back({{"order", s.order}, {"cutoff_deg", s.cutoff_deg}, {"mean_deg", s.mean}, {"std_deg", s.stddev}});
  j["ospa"] = ospa;
  json vaps = json::array();
  for (const auto& v : r.vaps)
    vaps.push_back({{"source", v.source},
                    {"period", v.period},
                    {"start_s", v.interval.start},
                    {"end_s", v.interval.end},
                    {"timestamps", v.timestamps},
                    {"valid", v.valid},
                    {"latency_s", detail::opt(v.latency)},
                    {"mean_abs_az_error_deg", detail::opt(v.mean_abs_az_error_deg)}});
  j["vaps"] = vaps;
  return j;
}

/// Inverse of metrics_to_json; OSPA series are not stored, only their summaries.
inline MetricsReport metrics_from_json(const json& j, const std::string& path = "report") {
  try {
    MetricsReport r;
    r.timestamps = j.at("timestamps").get<std::size_t>();
    r.valid_pairs = j.at("valid_pairs").get<std::size_t>();
    r.false_estimates = j.at("false_estimates").get<std::size_t>();
    r.false_in_vap = j.at("false_in_vap").get<std::size_t>();
    r.missed = j.at("missed").get<std::size_t>();
    r.breaks = j.at("breaks").get<std::size_t>();
    r.swaps = j.at("swaps").get<std::size_t>();
    r.undetected_vaps = j.at("undetected_vaps").get<std::size_t>();
    r.recording_duration = j.at("recording_duration_s").get<double>();
    r.vap_duration = j.at("vap_duration_s").get<double>();
    r.az_error_mean_deg = detail::get_opt(j, "az_error_mean_deg");
    r.az_error_std_deg = detail::get_opt(j, "az_error_std_deg");
    r.el_error_mean_deg = detail::get_opt(j, "el_error_mean_deg");
    r.el_error_std_deg = detail::get_opt(j, "el_error_std_deg");
    r.p_d = detail::get_opt(j, "p_d");
    for (const auto& v : j.value("p_d_per_source", json::array()))
      r.p_d_per_source.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
    r.far_recording = detail::get_opt(j, "far_recording");
    r.far_vap = detail::get_opt(j, "far_vap");
    r.track_latency = detail::get_opt(j, "track_latency_s");
    r.tfr = detail::get_opt(j, "tfr");
    for (const auto& o : j.at("ospa")) {
      OspaSummary s;
      s.order = o.at("order").get<double>();
      s.cutoff_deg = o.at("cutoff_deg").get<double>();
      s.mean = o.at("mean_deg").get<double>();
      s.stddev = o.at("std_deg").get<double>();
      r.ospa.push_back(s);
    }
    for (const auto& v : j.value("vaps", json::array())) {
      evaluate::VapRecord rec;
      rec.source = v.at("source").get<std::size_t>();
      rec.period = v.at("period").get<std::size_t>();
      rec.interval = {v.at("start_s").get<double>(), v.at("end_s").get<double>()};
      rec.timestamps = v.at("timestamps").get<std::size_t>();
      rec.valid = v.at("valid").get<std::size_t>();
      rec.latency = detail::get_opt(v, "latency_s");
      rec.mean_abs_az_error_deg = detail::get_opt(v, "mean_abs_az_error_deg");
      r.vaps.push_back(rec);
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(path, 0, std::string("invalid metrics report: ") + e.what());
  }
}

/// Aggregate over recordings: unweighted mean of each defined measure, totals of the counts, and
/// OSPA mean and deviation pooled over all timestamps (recovered from per-recording summaries).
inline MetricsReport aggregate(std::span<const MetricsReport> reports) {
  MetricsReport m = evaluate::aggregate(reports);
  for (std::size_t i = 0; i < m.ospa.size(); ++i) {
    double n = 0.0, s1 = 0.0, s2 = 0.0;
    for (const auto& r : reports) {
      if (i >= r.ospa.size()) continue;
      const auto& o = r.ospa[i];
      const auto w = static_cast<double>(r.timestamps);
      n += w;
      s1 += w * o.mean;
      s2 += w * (o.stddev * o.stddev + o.mean * o.mean);
    }
    if (n > 0.0) {
      m.ospa[i].mean = s1 / n;
      m.ospa[i].stddev = std::sqrt(std::max(0.0, s2 / n - m.ospa[i].mean * m.ospa[i].mean));
    }
  }
  return m;
}

inline std::vector<std::string> csv_columns(const MetricsReport& r) {
  std::vector<std::string> c = {"recording",         "submission",        "array",
                                "timestamps",        "valid_pairs",       "false_estimates",
                                "false_in_vap",      "missed",            "breaks",
                                "swaps",             "undetected_vaps",   "recording_duration_s",
                                "vap_duration_s",    "az_error_mean_deg", "az_error_std_deg",
                                "el_error_mean_deg", "el_error_std_deg",  "p_d",
                                "p_d_per_source",    "far_recording",     "far_vap",
                                "track_latency_s",   "tfr"};
  for (const auto& s : r.ospa) {
    c.push_back(ospa_column(s) + "_mean_deg");
    c.push_back(ospa_column(s) + "_std_deg");
  }
  return c;
}

inline std::vector<std::string> csv_cells(const ReportKey& key, const MetricsReport& r) {
  std::string per;
  for (std::size_t i = 0; i < r.p_d_per_source.size(); ++i) {
    if (i) per += ';';
    per += detail::cell(r.p_d_per_source[i]);
  }
  std::vector<std::string> c = {key.recording,
                                key.submission,
                                key.array,
                                std::to_string(r.timestamps),
                                std::to_string(r.valid_pairs),
                                std::to_string(r.false_estimates),
                                std::to_string(r.false_in_vap),
                                std::to_string(r.missed),
                                std::to_string(r.breaks),
                                std::to_string(r.swaps),
                                std::to_string(r.undetected_vaps),
                                detail::num(r.recording_duration),
                                detail::num(r.vap_duration),
                                detail::cell(r.az_error_mean_deg),
                                detail::cell(r.az_error_std_deg),
                                detail::cell(r.el_error_mean_deg),
                                detail::cell(r.el_error_std_deg),
                                detail::cell(r.p_d),
                                per,
                                detail::cell(r.far_recording),
                                detail::cell(r.far_vap),
                                detail::cell(r.track_latency),
                                detail::cell(r.tfr)};
  for (const auto& s : r.ospa) {
    c.push_back(detail::num(s.mean));
    c.push_back(detail::num(s.stddev));
  }
  return c;
}

/// Header plus one row per report. All reports must share the OSPA configuration.
inline std::string metrics_csv(const std::vector<ReportKey>& keys, std::span<const MetricsReport> reports) {
  if (keys.size() != reports.size()) throw ArgumentError("metrics_csv: one key per report required");
  std::ostringstream out;
  if (reports.empty()) return out.str();
  const auto header = csv_columns(reports.front());
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (std::size_t k = 0; k < reports.size(); ++k) {
    if (csv_columns(reports[k]) != header) throw ArgumentError("metrics_csv: reports differ in OSPA configuration");
    const auto cells = csv_cells(keys[k], reports[k]);
    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << detail::csv_escape(cells[i]);
    out << '\n';
  }
  return out.str();
}

/// Per-timestamp OSPA values, one column per configuration.
inline std::string ospa_series_csv(const std::vector<double>& clock, const MetricsReport& r) {
  std::ostringstream out;
  out << "timestamp";
  for (const auto& s : r.ospa) {
    if (s.series.size() != clock.size()) throw ArgumentError("ospa_series_csv: series length differs from the clock");
    out << ',' << ospa_column(s) << "_deg";
  }
  out << '\n';
  char buf[40];
  for (std::size_t k = 0; k < clock.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.9f", clock[k]);
    out << buf;
    for (const auto& s : r.ospa) out << ',' << detail::num(s.series[k]);
    out << '\n';
  }
  return out.str();
}

}  // namespace locata::report
