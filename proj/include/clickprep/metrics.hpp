#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clickprep/event.hpp"

namespace clickprep {

struct AttributionWindows {
  std::int64_t click_ms = 5 * kMillisPerMinute;
  std::int64_t atc_ms = 30 * kMillisPerMinute;
  std::int64_t buy_ms = 24 * kMillisPerHour;

  /// Throws Error(InvalidParams) unless 0 <= click <= atc <= buy.
  void validate() const;
  std::int64_t for_type(EventType t) const;
  Json to_json() const;
};

struct PlpGate {
  bool enabled = true;
  std::size_t top_n = 8;
  bool first_page_only = true;

  void validate() const;
  /// Whether a hit counts toward any denominator.
  bool hit_eligible(const Event& hit) const;
  /// Whether an interaction on `slot` of an eligible hit can be attributed.
  bool slot_eligible(const Event& hit, const RecommendedSlot& slot) const;
  Json to_json() const;
};

/// Breakdown cell: UTC day of the hit, page, widget and A/A segment.
struct CellKey {
  std::int64_t day = 0;
  PageType page_type = PageType::Home;
  std::string widget_id;
  std::string segment;  // "A1", "A2" or "NONE"

  auto operator<=>(const CellKey&) const = default;
};

CellKey cell_of(const Event& hit);

struct Attribution {
  std::size_t interaction_index = 0;  // position in the attributed log
  std::size_t hit_index = 0;
  std::string interaction_id;
  std::string hit_id;
  EventType type = EventType::Click;
  std::int64_t lag_ms = 0;
  // False for clicks excluded by the new-customer rule (either the click or
  // its hit carries excluded_from_metrics).
  bool counts_for_ctr = true;
  CellKey cell;
  std::optional<Money> line_amount;  // quantity * unit_price for BUY

  bool operator==(const Attribution& o) const {
    return interaction_index == o.interaction_index && hit_index == o.hit_index && type == o.type &&
           lag_ms == o.lag_ms && counts_for_ctr == o.counts_for_ctr;
  }
};

struct HitCounts {
  std::size_t hits = 0;      // eligible hits (ATC-TR, BTR denominator)
  std::size_t ctr_hits = 0;  // eligible hits not excluded from CTR

  bool operator==(const HitCounts&) const = default;
};

struct AttributionSet {
  std::vector<Attribution> pairs;  // ordered by interaction_index
  std::map<CellKey, HitCounts> eligible_hits;
  std::map<std::string, std::size_t> excluded;  // reason -> count
  AttributionWindows windows;
  PlpGate gate;

  std::size_t count(EventType t) const;
};

/// Matches every CLICK/ATC/BUY to the most recent hit shown to the same
/// customer that recommended the product, provided the interaction happened
/// within the type's window after the hit (boundary inclusive).
AttributionSet attribute(const EventLog& log, const AttributionWindows& windows = {}, const PlpGate& gate = {});

struct CellMetrics {
  std::size_t hits = 0;
  std::size_t ctr_hits = 0;
  std::size_t clicks = 0;
  std::size_t atcs = 0;
  std::size_t buys = 0;
  double revenue = 0.0;
  // Absent when the denominator is zero.
  std::optional<double> ctr;
  std::optional<double> atc_tr;
  std::optional<double> btr;

  void add(const CellMetrics& other);
  void finalize();
  Json to_json() const;
};

struct VisibilityFlag {
  PageType page_type = PageType::Home;
  std::string widget_id;
  double ctr = 0.0;
  double site_median_ctr = 0.0;
};

struct MetricsReport {
  static constexpr int kSchemaVersion = 1;

  std::map<CellKey, CellMetrics> cells;
  CellMetrics totals;
  std::vector<VisibilityFlag> low_visibility;

  /// Per-day CTR for one segment ("A1"/"A2"; "" means all segments).
  std::map<std::int64_t, std::optional<double>> daily_ctr(const std::string& segment = "") const;

  Json to_json() const;
  std::string to_csv() const;
};

MetricsReport rates(const AttributionSet& attr);

/// Sum of quantity * unit_price over attributed BUYs. Throws
/// Error(MissingPrice) for an attributed buy without a price or with a price
/// not expressed in the log's base currency.
double conversion_revenue(const AttributionSet& attr, const EventLog& log);

/// Page/widget cells whose CTR falls below fraction * median CTR across
/// cells. Throws Error(InsufficientCells) with fewer than two cells.
std::vector<VisibilityFlag> flag_low_visibility(const MetricsReport& report, double fraction = 0.25);

}  // namespace clickprep
