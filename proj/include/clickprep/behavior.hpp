#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "clickprep/event.hpp"
#include "clickprep/metrics.hpp"

namespace clickprep {

struct Evidence {
  std::string reason;
  double value = 0.0;

  bool operator==(const Evidence&) const = default;
};

/// Customers flagged by one rule, each with the evidence that triggered it.
struct FlagSet {
  std::string rule;
  std::map<std::string, std::vector<Evidence>> customers;
  Json parameters = Json::object();

  bool contains(const std::string& cust) const { return customers.count(cust) > 0; }
  std::size_t size() const noexcept { return customers.size(); }
  std::set<std::string> keys() const;
  Json to_json() const;
};

struct B2BConfig {
  double m = 5.0;  // 10 suits grocery-like catalogs

  void validate() const;
};

/// Flags customers whose quantity-weighted buys on any day exceed m times the
/// median over all (customer, day) pairs with a purchase. Throws
/// Error(NoPurchases) when the log has no BUY.
FlagSet detect_b2b(const EventLog& log, const B2BConfig& cfg = {});

/// Flags customers whose entire history is one HOME or PLP hit.
FlagSet detect_bounces(const EventLog& log);

struct BotConfig {
  std::vector<std::string> signature_user_agents = {"*bot*", "*crawl*", "*spider*", "*HeadlessChrome*"};
  std::vector<std::string> signature_ips = {"66.249.64.0/19"};
  double rate_threshold = 1.0;  // CLICK+ATC per second, sustained over the window
  std::int64_t rate_window_ms = 10 * kMillisPerSecond;
  std::size_t regularity_min_events = 20;
  double regularity_cv_max = 0.1;

  void validate() const;
  Json to_json() const;
  /// Reads {"user_agents": [...], "ips": [...]} plus any numeric field above;
  /// absent fields keep their defaults.
  static BotConfig from_json(const Json& j);
};

/// True when `ip` equals an address entry or falls inside a CIDR entry.
/// Unparseable entries or addresses never match.
bool ip_matches(const std::string& ip, const std::string& entry);

FlagSet detect_bots(const EventLog& log, const BotConfig& cfg = {});

struct NewCustomerConfig {
  double ratio = 0.7;
  std::size_t x_max = 10;
  std::size_t min_customers = 30;
  AttributionWindows windows;
  PlpGate gate;

  void validate() const;
  Json to_json() const;
};

struct CutoffRow {
  std::size_t x = 0;
  // Hits are bucketed by how many clicks the customer made before the hit.
  std::optional<double> ctr_at;           // history == x - 1
  std::optional<double> ctr_at_or_below;  // history < x
  std::optional<double> ctr_above;        // history >= x
  std::size_t hits_at_or_below = 0;
  std::size_t hits_above = 0;
  bool qualifies = false;
};

struct NewCustomerCutoff {
  std::size_t x = 0;
  std::vector<CutoffRow> table;
  Json to_json() const;
};

/// Per-hit click history: number of CLICK events by the same customer
/// strictly before the hit. Indexed like the log; non-hits get their own
/// running count.
std::vector<std::size_t> click_history(const EventLog& log);

/// Largest x in 1..x_max whose first-x-clicks CTR (both the bucket at x-1
/// and the cumulative one) is below ratio times the CTR after x clicks; 0
/// when none qualifies. Throws Error(InsufficientData) when fewer than
/// min_customers customers made x_max clicks.
NewCustomerCutoff new_customer_cutoff(const EventLog& log, const NewCustomerConfig& cfg = {});

/// Customers with at least one hit or click inside their first x clicks.
FlagSet new_customer_flags(const EventLog& log, std::size_t x);

struct ApplyPolicy {
  std::size_t new_customer_x = 0;
};

struct ApplyResult {
  EventLog log;
  CleaningReport report;
};

/// Applies flag sets in order. "bounce" removes the flagged customers' hits,
/// "b2b" and "bots" remove every event of a flagged customer, "newcust" keeps
/// events but marks hits and clicks inside the first x clicks as excluded
/// from CTR.
ApplyResult apply_flags(const EventLog& log, const std::vector<FlagSet>& flags, const ApplyPolicy& policy = {});

}  // namespace clickprep
