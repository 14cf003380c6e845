#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "clickprep/event.hpp"

namespace clickprep {

struct JourneyPolicy {
  bool quick_buy_enabled = false;
  double violation_rate_alarm = 0.05;

  void validate() const;
  Json to_json() const;
};

enum class JourneyVerdict { Clean, RemoveViolators, IntegrationAlarm };
std::string_view to_string(JourneyVerdict v);

struct Violation {
  std::string cust_id;
  std::string product_id;
  std::string event_id;  // the offending ATC or BUY
  EventType event_type = EventType::Buy;
  std::string missing;   // "CLICK" or "CLICK_OR_ATC"

  bool operator==(const Violation&) const = default;
};

struct JourneyReport {
  std::vector<Violation> violations;  // at most one per (customer, product)
  std::size_t pairs_audited = 0;      // (customer, product) pairs with an interaction
  double violation_rate = 0.0;
  JourneyVerdict verdict = JourneyVerdict::Clean;
  std::map<std::string, std::size_t> by_user_agent;
  JourneyPolicy policy;

  Json to_json() const;
};

/// Checks every (customer, product) pair for the Click -> Add-to-Cart -> Buy
/// order over the whole log. With quick buy enabled, ATC and BUY need no
/// preceding CLICK.
JourneyReport audit_journeys(const EventLog& log, const JourneyPolicy& policy = {});

struct JourneyCleanResult {
  EventLog log;
  CleaningReport report;
};

/// Drops all events of each violating (customer, product) pair. Throws
/// Error(AlarmRefusal) when the audit raised the integration alarm.
JourneyCleanResult remove_violators(const EventLog& log, const JourneyReport& report);

class ComboMap {
 public:
  /// Throws Error(InvalidParams) when a SKU already maps to another combo.
  void add(const std::string& sku, const std::string& combo);
  const std::string* combo_of(const std::string& sku) const;
  const std::map<std::string, std::string>& entries() const noexcept { return map_; }
  bool empty() const noexcept { return map_.empty(); }

  /// CSV with header `sku,combo_id`.
  static ComboMap read_csv(std::istream& in);
  void write_csv(std::ostream& out) const;

 private:
  std::map<std::string, std::string> map_;
};

struct ComboResult {
  EventLog log;
  CleaningReport report;
};

/// Rewrites BUYs of combo member SKUs to the combo id, then collapses
/// same-combo BUYs of one customer inside one session into the earliest one.
/// Line amounts of collapsed rows are added to the kept row when currencies
/// agree.
ComboResult expand_combos(const EventLog& log, const ComboMap& combos, std::int64_t session_gap_ms = 30 * kMillisPerMinute);

/// Distinct customers with at least one BUY and one HIT, divided by the HIT
/// count. Throws Error(NoHits).
double btr_buyer(const EventLog& log);

}  // namespace clickprep
