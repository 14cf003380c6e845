#include "clickprep/behavior.hpp"

#include <arpa/inet.h>
#include <fnmatch.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>

#include "clickprep/outliers.hpp"

namespace clickprep {

std::set<std::string> FlagSet::keys() const {
  std::set<std::string> out;
  for (const auto& [cust, ev] : customers) out.insert(cust);
  return out;
}

Json FlagSet::to_json() const {
  Json flagged = Json::object();
  for (const auto& [cust, evidence] : customers) {
    Json list = Json::array();
    for (const auto& e : evidence) list.push_back({{"reason", e.reason}, {"value", e.value}});
    flagged[cust] = std::move(list);
  }
  return {{"rule", rule}, {"parameters", parameters}, {"flagged", flagged}, {"count", customers.size()}};
}

namespace {

// Event indices per customer key, ordered by key for deterministic output.
std::map<std::string, std::vector<std::size_t>> by_customer(const EventLog& log) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < log.size(); ++i) out[log[i].customer_key()].push_back(i);
  return out;
}

}  // namespace

void B2BConfig::validate() const {
  if (!(m > 1.0)) throw Error(ErrorCode::InvalidParams, "B2B multiplier m must be > 1");
}

FlagSet detect_b2b(const EventLog& log, const B2BConfig& cfg) {
  cfg.validate();
  std::map<CustomerDay, std::int64_t> per_day;
  for (const auto& e : log)
    if (e.event_type == EventType::Buy) per_day[{e.customer_key(), utc_day(e.timestamp_utc)}] += e.quantity;
  if (per_day.empty()) throw Error(ErrorCode::NoPurchases, "no BUY events to build a buys/day population");

  std::vector<double> values;
  values.reserve(per_day.size());
  for (const auto& [key, n] : per_day) values.push_back(static_cast<double>(n));
  const double med = median(values);
  const double threshold = cfg.m * med;

  FlagSet flags;
  flags.rule = "b2b";
  flags.parameters = {{"m", cfg.m}, {"median_buys_per_day", med}, {"threshold", threshold}};
  for (const auto& [key, n] : per_day) {
    if (static_cast<double>(n) <= threshold) continue;
    auto& ev = flags.customers[key.cust_id];
    if (ev.empty()) {
      ev.push_back({"buys_per_day", static_cast<double>(n)});
    } else if (ev.front().value < static_cast<double>(n)) {
      ev.front().value = static_cast<double>(n);
    }
  }
  return flags;
}

FlagSet detect_bounces(const EventLog& log) {
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> seen;  // key -> (count, first index)
  for (std::size_t i = 0; i < log.size(); ++i) {
    auto it = seen.try_emplace(log[i].customer_key(), 0, i).first;
    ++it->second.first;
  }
  FlagSet flags;
  flags.rule = "bounce";
  for (const auto& [cust, info] : seen) {
    if (info.first != 1) continue;
    const Event& e = log[info.second];
    if (e.is_hit() && (e.page_type == PageType::Home || e.page_type == PageType::Plp))
      flags.customers[cust].push_back({"single_landing_hit", 1.0});
  }
  return flags;
}

void BotConfig::validate() const {
  if (!(rate_threshold > 0.0)) throw Error(ErrorCode::InvalidParams, "bot rate_threshold must be > 0");
  if (rate_window_ms <= 0) throw Error(ErrorCode::InvalidParams, "bot rate window must be positive");
  if (regularity_min_events < 3) throw Error(ErrorCode::InvalidParams, "regularity_min_events must be >= 3");
  if (!(regularity_cv_max > 0.0)) throw Error(ErrorCode::InvalidParams, "regularity_cv_max must be > 0");
}

Json BotConfig::to_json() const {
  return {{"user_agents", signature_user_agents},
          {"ips", signature_ips},
          {"rate_threshold", rate_threshold},
          {"rate_window_ms", rate_window_ms},
          {"regularity_min_events", regularity_min_events},
          {"regularity_cv_max", regularity_cv_max}};
}

BotConfig BotConfig::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "bot config must be a JSON object");
  static const std::set<std::string> known = {"user_agents",           "ips",
                                              "rate_threshold",        "rate_window_ms",
                                              "regularity_min_events", "regularity_cv_max"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw Error(ErrorCode::ConfigInvalid, "bot config: unknown key '" + key + "'");
  BotConfig c;
  try {
    if (j.contains("user_agents")) c.signature_user_agents = j.at("user_agents").get<std::vector<std::string>>();
    if (j.contains("ips")) c.signature_ips = j.at("ips").get<std::vector<std::string>>();
    if (j.contains("rate_threshold")) c.rate_threshold = j.at("rate_threshold").get<double>();
    if (j.contains("rate_window_ms")) c.rate_window_ms = j.at("rate_window_ms").get<std::int64_t>();
    if (j.contains("regularity_min_events")) c.regularity_min_events = j.at("regularity_min_events").get<std::size_t>();
    if (j.contains("regularity_cv_max")) c.regularity_cv_max = j.at("regularity_cv_max").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigInvalid, std::string("bot config: ") + ex.what());
  }
  c.validate();
  return c;
}

namespace {

struct Address {
  int family = 0;
  std::array<unsigned char, 16> bytes{};
  std::size_t bits() const { return family == AF_INET ? 32 : 128; }
};

std::optional<Address> parse_address(const std::string& text) {
  Address a;
  if (inet_pton(AF_INET, text.c_str(), a.bytes.data()) == 1) {
    a.family = AF_INET;
    return a;
  }
  if (inet_pton(AF_INET6, text.c_str(), a.bytes.data()) == 1) {
    a.family = AF_INET6;
    return a;
  }
  return std::nullopt;
}

}  // namespace

bool ip_matches(const std::string& ip, const std::string& entry) {
  const auto slash = entry.find('/');
  const auto net = parse_address(entry.substr(0, slash));
  const auto addr = parse_address(ip);
  if (!net || !addr || net->family != addr->family) return false;
  std::size_t prefix = net->bits();
  if (slash != std::string::npos) {
    const std::string len = entry.substr(slash + 1);
    if (len.empty() || len.size() > 3 || !std::all_of(len.begin(), len.end(), ::isdigit)) return false;
    prefix = std::stoul(len);
    if (prefix > net->bits()) return false;
  }
  for (std::size_t bit = 0; bit < prefix; ++bit) {
    const unsigned mask = 0x80u >> (bit % 8);
    if ((net->bytes[bit / 8] & mask) != (addr->bytes[bit / 8] & mask)) return false;
  }
  return true;
}

namespace {

// Lowest coefficient of variation of inter-click gaps over any run of
// `run` consecutive clicks; nullopt when there are fewer clicks.
std::optional<double> min_gap_cv(const std::vector<std::int64_t>& times, std::size_t run) {
  if (times.size() < run) return std::nullopt;
  const std::size_t gaps = run - 1;
  __int128 sum = 0, sumsq = 0;
  std::optional<double> best;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const __int128 g = times[i] - times[i - 1];
    sum += g;
    sumsq += g * g;
    if (i > gaps) {
      const __int128 old = times[i - gaps] - times[i - gaps - 1];
      sum -= old;
      sumsq -= old * old;
    }
    if (i < gaps) continue;
    const __int128 n = gaps;
    const __int128 spread = n * sumsq - sum * sum;  // n^2 * variance
    const double cv = sum == 0 ? 0.0 : std::sqrt(static_cast<double>(spread)) / static_cast<double>(sum);
    if (!best || cv < *best) best = cv;
  }
  return best;
}

}  // namespace

FlagSet detect_bots(const EventLog& log, const BotConfig& cfg) {
  cfg.validate();
  FlagSet flags;
  flags.rule = "bots";
  flags.parameters = cfg.to_json();
  const double window_s = static_cast<double>(cfg.rate_window_ms) / kMillisPerSecond;
  const double rate_count = cfg.rate_threshold * window_s;

  for (const auto& [cust, idx] : by_customer(log)) {
    std::vector<Evidence> ev;

    bool ua_hit = false, ip_hit = false;
    for (std::size_t i : idx) {
      const Event& e = log[i];
      if (!ua_hit && e.user_agent) {
        for (const auto& pat : cfg.signature_user_agents) {
          if (fnmatch(pat.c_str(), e.user_agent->c_str(), FNM_CASEFOLD) == 0) {
            ua_hit = true;
            break;
          }
        }
      }
      if (!ip_hit && e.ip) {
        ip_hit = std::any_of(cfg.signature_ips.begin(), cfg.signature_ips.end(),
                             [&](const std::string& entry) { return ip_matches(*e.ip, entry); });
      }
    }
    if (ua_hit) ev.push_back({"user_agent_signature", 1.0});
    if (ip_hit) ev.push_back({"ip_signature", 1.0});

    std::vector<std::int64_t> active, clicks;
    for (std::size_t i : idx) {
      const Event& e = log[i];
      if (e.event_type == EventType::Click || e.event_type == EventType::Atc) active.push_back(e.timestamp_utc);
      if (e.event_type == EventType::Click) clicks.push_back(e.timestamp_utc);
    }
    std::size_t peak = 0;
    for (std::size_t lo = 0, hi = 0; hi < active.size(); ++hi) {
      while (active[hi] - active[lo] > cfg.rate_window_ms) ++lo;
      peak = std::max(peak, hi - lo + 1);
    }
    if (peak > 0 && static_cast<double>(peak) >= rate_count) ev.push_back({"rate", static_cast<double>(peak) / window_s});

    if (auto cv = min_gap_cv(clicks, cfg.regularity_min_events); cv && *cv < cfg.regularity_cv_max)
      ev.push_back({"regularity", *cv});

    if (!ev.empty()) flags.customers[cust] = std::move(ev);
  }
  return flags;
}

void NewCustomerConfig::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::InvalidParams, "new-customer ratio must be in (0,1)");
  if (x_max < 1) throw Error(ErrorCode::InvalidParams, "new-customer x_max must be >= 1");
  windows.validate();
  gate.validate();
}

Json NewCustomerConfig::to_json() const {
  return {{"ratio", ratio}, {"x_max", x_max}, {"min_customers", min_customers}};
}

Json NewCustomerCutoff::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json rows = Json::array();
  for (const auto& r : table)
    rows.push_back({{"x", r.x},
                    {"ctr_at", opt(r.ctr_at)},
                    {"ctr_at_or_below", opt(r.ctr_at_or_below)},
                    {"ctr_above", opt(r.ctr_above)},
                    {"hits_at_or_below", r.hits_at_or_below},
                    {"hits_above", r.hits_above},
                    {"qualifies", r.qualifies}});
  return {{"x", x}, {"table", rows}};
}

std::vector<std::size_t> click_history(const EventLog& log) {
  std::vector<std::size_t> history(log.size());
  std::unordered_map<std::string, std::size_t> clicks;
  for (std::size_t i = 0; i < log.size(); ++i) {
    auto& n = clicks[log[i].customer_key()];
    history[i] = n;
    if (log[i].event_type == EventType::Click) ++n;
  }
  return history;
}

NewCustomerCutoff new_customer_cutoff(const EventLog& log, const NewCustomerConfig& cfg) {
  cfg.validate();
  const auto history = click_history(log);

  std::unordered_map<std::string, std::size_t> total_clicks;
  for (const auto& e : log)
    if (e.event_type == EventType::Click) ++total_clicks[e.customer_key()];
  const auto seasoned = static_cast<std::size_t>(std::count_if(
      total_clicks.begin(), total_clicks.end(), [&](const auto& kv) { return kv.second >= cfg.x_max; }));
  if (seasoned < cfg.min_customers)
    throw Error(ErrorCode::InsufficientData, std::to_string(seasoned) + " customers reach " + std::to_string(cfg.x_max) +
                                                 " clicks; " + std::to_string(cfg.min_customers) + " required");

  const auto attr = attribute(log, cfg.windows, cfg.gate);
  std::vector<std::size_t> clicks_on(log.size(), 0);
  for (const auto& a : attr.pairs)
    if (a.type == EventType::Click) ++clicks_on[a.hit_index];

  // Bucket b < x_max holds hits with exactly b prior clicks; the last bucket
  // holds everything from x_max on.
  std::vector<std::size_t> hits(cfg.x_max + 1, 0), clicks(cfg.x_max + 1, 0);
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (!log[i].is_hit() || !cfg.gate.hit_eligible(log[i])) continue;
    const std::size_t b = std::min(history[i], cfg.x_max);
    ++hits[b];
    clicks[b] += clicks_on[i];
  }

  auto ratio = [](std::size_t c, std::size_t h) -> std::optional<double> {
    if (h == 0) return std::nullopt;
    return static_cast<double>(c) / static_cast<double>(h);
  };

  NewCustomerCutoff out;
  for (std::size_t x = 1; x <= cfg.x_max; ++x) {
    std::size_t hb = 0, cb = 0, ha = 0, ca = 0;
    for (std::size_t b = 0; b <= cfg.x_max; ++b) {
      (b < x ? hb : ha) += hits[b];
      (b < x ? cb : ca) += clicks[b];
    }
    CutoffRow row;
    row.x = x;
    row.ctr_at = ratio(clicks[x - 1], hits[x - 1]);
    row.ctr_at_or_below = ratio(cb, hb);
    row.ctr_above = ratio(ca, ha);
    row.hits_at_or_below = hb;
    row.hits_above = ha;
    row.qualifies = row.ctr_at && row.ctr_at_or_below && row.ctr_above &&
                    *row.ctr_at < cfg.ratio * *row.ctr_above && *row.ctr_at_or_below < cfg.ratio * *row.ctr_above;
    if (row.qualifies) out.x = x;
    out.table.push_back(row);
  }
  return out;
}

FlagSet new_customer_flags(const EventLog& log, std::size_t x) {
  FlagSet flags;
  flags.rule = "newcust";
  flags.parameters = {{"x", x}};
  if (x == 0) return flags;
  const auto history = click_history(log);
  std::map<std::string, std::size_t> initial;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const Event& e = log[i];
    if (history[i] >= x) continue;
    if (e.is_hit()) initial.try_emplace(e.customer_key(), 0);
    if (e.event_type == EventType::Click) ++initial[e.customer_key()];
  }
  for (const auto& [cust, n] : initial) flags.customers[cust].push_back({"initial_clicks", static_cast<double>(n)});
  return flags;
}

ApplyResult apply_flags(const EventLog& log, const std::vector<FlagSet>& flags, const ApplyPolicy& policy) {
  std::vector<Event> events(log.begin(), log.end());
  std::vector<bool> removed(events.size(), false);
  CleaningReport report;

  std::vector<std::size_t> history;
  for (const auto& fs : flags) {
    RuleOutcome outcome;
    outcome.rule = fs.rule;
    outcome.parameters = fs.parameters;
    outcome.customers_flagged = fs.size();

    if (fs.rule == "newcust") {
      const std::size_t x = policy.new_customer_x;
      if (history.empty()) history = click_history(log);
      std::size_t hits = 0, clicks = 0;
      for (std::size_t i = 0; i < events.size(); ++i) {
        Event& e = events[i];
        if (removed[i] || history[i] >= x || !fs.contains(e.customer_key())) continue;
        if (e.is_hit() || e.event_type == EventType::Click) {
          if (!e.excluded_from_metrics) (e.is_hit() ? hits : clicks)++;
          e.excluded_from_metrics = true;
        }
      }
      outcome.parameters["x"] = x;
      outcome.details = {{"hits_excluded", hits}, {"clicks_excluded", clicks}};
    } else {
      const bool hits_only = fs.rule == "bounce";
      for (std::size_t i = 0; i < events.size(); ++i) {
        if (removed[i] || !fs.contains(events[i].customer_key())) continue;
        if (hits_only && !events[i].is_hit()) continue;
        removed[i] = true;
        ++outcome.records_removed;
        if (events[i].is_hit()) ++outcome.hits_removed;
      }
    }
    report.rules.push_back(std::move(outcome));
  }

  std::vector<Event> kept;
  kept.reserve(events.size());
  for (std::size_t i = 0; i < events.size(); ++i)
    if (!removed[i]) kept.push_back(std::move(events[i]));
  return {log.with_events(std::move(kept)), std::move(report)};
}

}  // namespace clickprep
