#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "clickprep/event.hpp"
#include "clickprep/metrics.hpp"

namespace clickprep {

struct SegmentMap {
  std::map<std::string, Segment> assignment;
  std::uint64_t seed = 0;

  std::size_t count(Segment s) const;
  Json to_json() const;
};

/// Ranks customers by a seeded hash and puts the first half (rounded up) in
/// A1, so the split is exact and does not depend on enumeration order.
SegmentMap assign_segments(const std::set<std::string>& cust_ids, std::uint64_t seed);

/// Keeps segment flags already on the events; customers without any flag are
/// assigned with assign_segments and stamped.
EventLog ensure_segments(const EventLog& log, std::uint64_t seed);

struct AAThresholds {
  double diff_max = 0.10;
  double corr_min = 0.8;
  std::size_t min_days = 5;

  void validate() const;
  Json to_json() const;
};

enum class AAVerdictKind { Consistent, Inconsistent };
std::string_view to_string(AAVerdictKind v);

struct AAVerdict {
  std::vector<std::int64_t> days;  // may be empty when series came without dates
  std::vector<double> a1;
  std::vector<double> a2;
  double mean_relative_difference = 0.0;
  std::optional<double> correlation;  // absent when either series is constant
  bool degenerate = false;
  AAVerdictKind verdict = AAVerdictKind::Inconsistent;
  AAThresholds thresholds;

  Json to_json() const;
};

/// Throws Error(SeriesTooShort) when the series differ in length or are
/// shorter than min_days. A constant series leaves the correlation undefined
/// and the verdict rests on the difference test alone.
AAVerdict compare_aa(const std::vector<double>& a1, const std::vector<double>& a2, const AAThresholds& t = {});

/// Daily CTR per segment from a metrics report. `days` keeps only the
/// earliest that many days (0 keeps all). Throws Error(InsufficientData) when
/// a kept day lacks a CTR for either segment.
AAVerdict compare_aa(const MetricsReport& report, std::size_t days = 0, const AAThresholds& t = {});

}  // namespace clickprep
