// Copyright 2026 The locata-kit Authors
// Licensed under the Apache License, Version 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Voice-activity periods per source.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "locata/error.hpp"

namespace locata {

/// Closed interval [start, end] in seconds.
struct Interval {
  double start = 0.0;
  double end = 0.0;

  double duration() const noexcept { return end - start; }
  bool contains(double t) const noexcept { return t >= start && t <= end; }
  bool operator==(const Interval&) const = default;
};

/// VAP lists indexed by source (0-based here; source n is reported as n + 1).
struct VapTable {
  std::vector<std::vector<Interval>> sources;

  std::size_t source_count() const noexcept { return sources.size(); }

  void validate() const {
    for (std::size_t n = 0; n < sources.size(); ++n) {
      const auto& v = sources[n];
      for (std::size_t a = 0; a < v.size(); ++a) {
        if (!(v[a].end > v[a].start))
          throw ArgumentError("VapTable: source " + std::to_string(n + 1) + " period " + std::to_string(a) +
                              " has end <= start");
        if (a > 0 && !(v[a].start > v[a - 1].end))
          throw ArgumentError("VapTable: source " + std::to_string(n + 1) + " periods overlap or are unordered");
      }
    }
  }

  std::optional<std::size_t> period_index(std::size_t n, double t) const {
    const auto& v = sources.at(n);
    for (std::size_t a = 0; a < v.size(); ++a)
      if (v[a].contains(t)) return a;
    return std::nullopt;
  }

  bool active(std::size_t n, double t) const { return period_index(n, t).has_value(); }

  bool any_active(double t) const {
    for (std::size_t n = 0; n < sources.size(); ++n)
      if (active(n, t)) return true;
    return false;
  }

  double total_duration() const noexcept {
    double d = 0.0;
    for (const auto& v : sources)
      for (const auto& i : v) d += i.duration();
    return d;
  }

  bool operator==(const VapTable&) const = default;
};

}  // namespace locata
