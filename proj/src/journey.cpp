#include "clickprep/journey.hpp"

#include <set>
#include <sstream>
#include <unordered_map>

#include "clickprep/ingest.hpp"

namespace clickprep {

void JourneyPolicy::validate() const {
  if (!(violation_rate_alarm > 0.0 && violation_rate_alarm < 1.0))
    throw Error(ErrorCode::InvalidParams, "violation_rate_alarm must be in (0,1)");
}

Json JourneyPolicy::to_json() const {
  return {{"quick_buy_enabled", quick_buy_enabled}, {"violation_rate_alarm", violation_rate_alarm}};
}

std::string_view to_string(JourneyVerdict v) {
  switch (v) {
    case JourneyVerdict::Clean: return "CLEAN";
    case JourneyVerdict::RemoveViolators: return "REMOVE_VIOLATORS";
    case JourneyVerdict::IntegrationAlarm: return "INTEGRATION_ALARM";
  }
  return "CLEAN";
}

Json JourneyReport::to_json() const {
  Json list = Json::array();
  for (const auto& v : violations)
    list.push_back({{"cust_id", v.cust_id},
                    {"product_id", v.product_id},
                    {"event_id", v.event_id},
                    {"event_type", to_string(v.event_type)},
                    {"missing", v.missing}});
  return {{"verdict", to_string(verdict)},
          {"violation_rate", violation_rate},
          {"pairs_audited", pairs_audited},
          {"violation_count", violations.size()},
          {"violations", list},
          {"by_user_agent", by_user_agent},
          {"policy", policy.to_json()}};
}

namespace {

using PairKey = std::pair<std::string, std::string>;

}  // namespace

JourneyReport audit_journeys(const EventLog& log, const JourneyPolicy& policy) {
  policy.validate();
  JourneyReport report;
  report.policy = policy;

  // Earliest CLICK and earliest CLICK-or-ATC time per pair, plus the pairs in
  // first-seen order.
  struct Seen {
    std::optional<std::int64_t> click;
    std::optional<std::int64_t> click_or_atc;
    bool violated = false;
  };
  std::map<PairKey, Seen> pairs;
  for (const auto& e : log) {
    if (!e.is_interaction()) continue;
    auto& s = pairs[{e.customer_key(), *e.product_id}];
    if (e.event_type == EventType::Click && !s.click) s.click = e.timestamp_utc;
    if (e.event_type != EventType::Buy && !s.click_or_atc) s.click_or_atc = e.timestamp_utc;
  }
  report.pairs_audited = pairs.size();

  if (!policy.quick_buy_enabled) {
    for (const auto& e : log) {
      if (e.event_type != EventType::Atc && e.event_type != EventType::Buy) continue;
      auto& s = pairs.at({e.customer_key(), *e.product_id});
      if (s.violated) continue;
      const bool atc = e.event_type == EventType::Atc;
      const auto& before = atc ? s.click : s.click_or_atc;
      if (before && *before <= e.timestamp_utc) continue;
      s.violated = true;
      report.violations.push_back({e.customer_key(), *e.product_id, e.event_id, e.event_type, atc ? "CLICK" : "CLICK_OR_ATC"});
      ++report.by_user_agent[e.user_agent.value_or("unknown")];
    }
  }

  report.violation_rate =
      pairs.empty() ? 0.0 : static_cast<double>(report.violations.size()) / static_cast<double>(pairs.size());
  if (report.violation_rate >= policy.violation_rate_alarm)
    report.verdict = JourneyVerdict::IntegrationAlarm;
  else if (!report.violations.empty())
    report.verdict = JourneyVerdict::RemoveViolators;
  return report;
}

JourneyCleanResult remove_violators(const EventLog& log, const JourneyReport& report) {
  if (report.verdict == JourneyVerdict::IntegrationAlarm)
    throw Error(ErrorCode::AlarmRefusal, "violation rate " + std::to_string(report.violation_rate) +
                                             " is at or above the alarm threshold; investigate the integration first");
  std::set<PairKey> bad;
  for (const auto& v : report.violations) bad.insert({v.cust_id, v.product_id});

  RuleOutcome outcome;
  outcome.rule = "journey_violators";
  outcome.parameters = report.policy.to_json();
  std::set<std::string> customers;
  std::vector<Event> kept;
  kept.reserve(log.size());
  for (const auto& e : log) {
    if (e.is_interaction() && bad.count({e.customer_key(), *e.product_id})) {
      ++outcome.records_removed;
      customers.insert(e.customer_key());
      continue;
    }
    kept.push_back(e);
  }
  outcome.customers_flagged = customers.size();
  outcome.details = {{"pairs_removed", bad.size()}, {"violation_rate", report.violation_rate}};
  CleaningReport cr;
  cr.rules.push_back(std::move(outcome));
  return {log.with_events(std::move(kept)), std::move(cr)};
}

void ComboMap::add(const std::string& sku, const std::string& combo) {
  auto [it, fresh] = map_.emplace(sku, combo);
  if (!fresh && it->second != combo)
    throw Error(ErrorCode::InvalidParams, "SKU " + sku + " maps to both " + it->second + " and " + combo);
}

const std::string* ComboMap::combo_of(const std::string& sku) const {
  auto it = map_.find(sku);
  return it == map_.end() ? nullptr : &it->second;
}

ComboMap ComboMap::read_csv(std::istream& in) {
  ComboMap map;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    while (!s.empty() && s.front() == ' ') s.erase(s.begin());
    return s;
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw Error(ErrorCode::MalformedRecord, "combo map line " + std::to_string(line_no) + " needs two columns");
    const std::string sku = trim(line.substr(0, comma)), combo = trim(line.substr(comma + 1));
    if (line_no == 1 && sku == "sku" && combo == "combo_id") continue;
    if (line_no == 1) throw Error(ErrorCode::MalformedRecord, "combo map header must be sku,combo_id");
    if (sku.empty() || combo.empty())
      throw Error(ErrorCode::MalformedRecord, "combo map line " + std::to_string(line_no) + " has an empty field");
    map.add(sku, combo);
  }
  return map;
}

void ComboMap::write_csv(std::ostream& out) const {
  out << "sku,combo_id\n";
  for (const auto& [sku, combo] : map_) out << sku << ',' << combo << '\n';
}

ComboResult expand_combos(const EventLog& log, const ComboMap& combos, std::int64_t session_gap_ms) {
  const auto sessions = session_ids(log, session_gap_ms);
  std::vector<Event> events(log.begin(), log.end());
  std::vector<bool> removed(events.size(), false);
  std::map<std::tuple<std::string, std::size_t, std::string>, std::size_t> kept_buy;
  std::size_t rewritten = 0, collapsed = 0;

  for (std::size_t i = 0; i < events.size(); ++i) {
    Event& e = events[i];
    if (e.event_type != EventType::Buy) continue;
    const std::string* combo = combos.combo_of(*e.product_id);
    if (!combo) continue;
    e.product_id = *combo;
    ++rewritten;
    auto [it, fresh] = kept_buy.try_emplace({e.customer_key(), sessions[i], *combo}, i);
    if (fresh) continue;
    Event& first = events[it->second];
    if (first.unit_price && e.unit_price && first.unit_price->currency == e.unit_price->currency)
      first.unit_price->amount = (first.unit_price->amount * first.quantity + e.unit_price->amount * e.quantity) /
                                 static_cast<double>(first.quantity);
    removed[i] = true;
    ++collapsed;
  }

  std::vector<Event> kept;
  kept.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i)
    if (!removed[i]) kept.push_back(std::move(events[i]));

  RuleOutcome outcome;
  outcome.rule = "combos";
  outcome.records_removed = collapsed;
  outcome.parameters = {{"combo_skus", combos.entries().size()}, {"session_gap_ms", session_gap_ms}};
  outcome.details = {{"buys_rewritten", rewritten}, {"buys_collapsed", collapsed}};
  CleaningReport cr;
  cr.rules.push_back(std::move(outcome));
  return {log.with_events(std::move(kept)), std::move(cr)};
}

double btr_buyer(const EventLog& log) {
  std::set<std::string> buyers, shown;
  std::size_t hits = 0;
  for (const auto& e : log) {
    if (e.is_hit()) {
      ++hits;
      shown.insert(e.customer_key());
    } else if (e.event_type == EventType::Buy) {
      buyers.insert(e.customer_key());
    }
  }
  if (hits == 0) throw Error(ErrorCode::NoHits, "btr_buyer needs at least one hit");
  std::size_t n = 0;
  for (const auto& b : buyers) n += shown.count(b);
  return static_cast<double>(n) / static_cast<double>(hits);
}

}  // namespace clickprep
