#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "clickprep/event.hpp"

namespace clickprep {

struct CurrencyShare {
  std::string code;
  double rate = 1.0;    // one unit in the base currency
  double weight = 1.0;  // relative share of customers paying in it
};

struct SynthConfig {
  std::size_t customers = 2000;
  std::size_t days = 7;
  std::int64_t start_ms = 1'704'067'200'000;  // 2024-01-01T00:00:00Z
  std::uint64_t seed = 1;

  // Clean human behavior.
  double visit_prob = 0.45;
  double views_log_mu = 1.5;  // daily views ~ ceil(lognormal), capped
  double views_log_sigma = 0.7;
  std::int64_t views_cap = 40;
  double gap_median_s = 20.0;
  double gap_sigma = 1.0;
  double gap_cap_s = 280.0;
  double base_ctr = 0.07;
  double base_atctr = 0.014;
  double base_btr = 0.0035;
  double daily_ctr_variation = 0.15;  // sd of the log day factor, shared by both segments
  double segment_ctr_ratio = 1.0;     // CTR multiplier for segment A2
  std::size_t new_customer_ramp_clicks = 0;
  double new_customer_ctr_factor = 0.5;
  double plp_landing_prob = 0.3;
  double account_fraction = 0.7;
  double login_prob = 0.6;

  // Pathologies.
  double bounce_fraction = 0.2;
  std::size_t bot_count = 20;
  double bot_clicks_per_second = 2.0;
  std::int64_t bot_regular_gap_ms = 5000;
  std::size_t b2b_count = 4;
  double b2b_buy_multiplier = 10.0;
  double duplicate_glitch_prob = 0.01;
  std::size_t outlier_customers = 5;
  std::int64_t outlier_views_min = 300;
  std::int64_t outlier_views_max = 460;
  std::size_t combo_catalog = 20;
  double multi_device_fraction = 0.1;
  std::size_t shared_cookie_pairs = 10;

  // Catalog and prices.
  std::size_t catalog = 2000;
  double price_min = 5.0;
  double price_max = 200.0;
  std::string base_currency = "USD";
  std::vector<CurrencyShare> currencies = {{"USD", 1.0, 0.6}, {"EUR", 1.1, 0.3}, {"GBP", 1.27, 0.1}};

  /// No bounces, bots, B2B, outliers, glitches, combos or shared cookies.
  static SynthConfig zero_pathology();

  /// Throws Error(InfeasibleConfig).
  void validate() const;
  Json to_json() const;
  /// Fields absent from `j` keep their defaults. Throws Error(ConfigInvalid).
  static SynthConfig from_json(const Json& j);
};

enum class CustomerLabel { Clean, Bounce, Bot, B2B, Outlier };
std::string_view to_string(CustomerLabel l);

struct SynthCustomer {
  std::string person_id;
  CustomerLabel label = CustomerLabel::Clean;
  std::optional<std::string> user_id;
  std::vector<std::string> cookies;
  Segment segment = Segment::A1;
  std::string bot_kind;  // "fast", "regular" or "signature" for bots

  /// Identifier a correct resolution assigns: the user id, else the cookie.
  const std::string& canonical_id() const { return user_id ? *user_id : cookies.front(); }
};

struct GroundTruth {
  std::map<std::string, SynthCustomer> customers;  // by person id
  std::map<std::string, std::string> event_person;
  std::set<std::string> duplicate_glitch;
  std::set<std::string> ambiguous_events;  // anonymous events on a shared cookie
  std::set<std::string> shared_cookies;
  std::map<std::string, std::string> combos;  // sku -> combo id
  std::string base_currency;
  std::map<std::string, double> rates;

  /// Canonical ids of customers carrying `label`.
  std::set<std::string> canonical_ids(CustomerLabel label) const;
  Json to_json() const;
};

struct SynthResult {
  EventLog log;
  GroundTruth truth;
};

/// Deterministic for a given config: customers are generated independently
/// from per-customer seeds and merged.
SynthResult generate(const SynthConfig& cfg);

}  // namespace clickprep
