#include "clickprep/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

namespace clickprep {

void AttributionWindows::validate() const {
  if (click_ms < 0 || click_ms > atc_ms || atc_ms > buy_ms)
    throw Error(ErrorCode::InvalidParams, "attribution windows must satisfy 0 <= click <= atc <= buy");
}

std::int64_t AttributionWindows::for_type(EventType t) const {
  switch (t) {
    case EventType::Click: return click_ms;
    case EventType::Atc: return atc_ms;
    case EventType::Buy: return buy_ms;
    case EventType::Hit: break;
  }
  return 0;
}

Json AttributionWindows::to_json() const {
  return {{"click_ms", click_ms}, {"atc_ms", atc_ms}, {"buy_ms", buy_ms}};
}

void PlpGate::validate() const {
  if (top_n < 1) throw Error(ErrorCode::InvalidParams, "PLP gate top_n must be >= 1");
}

bool PlpGate::hit_eligible(const Event& hit) const {
  if (!enabled || hit.page_type != PageType::Plp) return true;
  if (first_page_only && hit.page_number.value_or(1) != 1) return false;
  return std::any_of(hit.recommended_products.begin(), hit.recommended_products.end(),
                     [&](const RecommendedSlot& s) { return static_cast<std::size_t>(s.slot_index) < top_n; });
}

bool PlpGate::slot_eligible(const Event& hit, const RecommendedSlot& slot) const {
  if (!enabled || hit.page_type != PageType::Plp) return true;
  return static_cast<std::size_t>(slot.slot_index) < top_n;
}

Json PlpGate::to_json() const {
  return {{"enabled", enabled}, {"top_n", top_n}, {"first_page_only", first_page_only}};
}

CellKey cell_of(const Event& hit) {
  return CellKey{utc_day(hit.timestamp_utc), hit.page_type, hit.widget_id.value_or(""),
                 hit.segment_flag ? std::string(to_string(*hit.segment_flag)) : std::string("NONE")};
}

std::size_t AttributionSet::count(EventType t) const {
  return static_cast<std::size_t>(std::count_if(pairs.begin(), pairs.end(), [t](const Attribution& a) { return a.type == t; }));
}

namespace {

struct HitRef {
  std::uint64_t key;
  std::int64_t t;
  std::size_t index;
};

// Dense ids for customer keys and products so pair lookups avoid string keys.
class Interner {
 public:
  std::uint32_t id(std::string_view s) { return ids_.try_emplace(s, static_cast<std::uint32_t>(ids_.size())).first->second; }
  std::optional<std::uint32_t> find(std::string_view s) const {
    auto it = ids_.find(s);
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::unordered_map<std::string_view, std::uint32_t> ids_;
};

std::uint64_t pair_key(std::uint32_t customer, std::uint32_t product) {
  return (static_cast<std::uint64_t>(customer) << 32) | product;
}

}  // namespace

AttributionSet attribute(const EventLog& log, const AttributionWindows& windows, const PlpGate& gate) {
  windows.validate();
  gate.validate();

  AttributionSet out;
  out.windows = windows;
  out.gate = gate;

  Interner customers, products;
  std::vector<HitRef> shown;  // sorted by (key, t, index) below
  std::vector<std::uint32_t> slot_products;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log[i];
    if (!e.is_hit()) continue;
    if (!gate.hit_eligible(e)) {
      ++out.excluded["hit_gated"];
      continue;
    }
    auto& counts = out.eligible_hits[cell_of(e)];
    ++counts.hits;
    if (!e.excluded_from_metrics) ++counts.ctr_hits;
    slot_products.clear();
    for (const auto& s : e.recommended_products)
      if (gate.slot_eligible(e, s)) slot_products.push_back(products.id(s.product_id));
    std::sort(slot_products.begin(), slot_products.end());
    slot_products.erase(std::unique(slot_products.begin(), slot_products.end()), slot_products.end());
    const auto cust = customers.id(e.customer_key());
    for (auto p : slot_products) shown.push_back({pair_key(cust, p), e.timestamp_utc, i});
  }

  std::sort(shown.begin(), shown.end(), [](const HitRef& a, const HitRef& b) {
    return a.key != b.key ? a.key < b.key : (a.t != b.t ? a.t < b.t : a.index < b.index);
  });

  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log[i];
    if (!e.is_interaction()) continue;
    const std::string reason_prefix = std::string("unattributed_") + std::string(to_string(e.event_type));
    const auto cust = customers.find(e.customer_key());
    const auto prod = products.find(*e.product_id);
    if (!cust || !prod) {
      ++out.excluded[reason_prefix];
      continue;
    }
    const std::uint64_t key = pair_key(*cust, *prod);
    // Last hit with t_hit <= t; ties resolve to the later log position.
    auto first = std::lower_bound(shown.begin(), shown.end(), key,
                                  [](const HitRef& h, std::uint64_t k) { return h.key < k; });
    auto after = std::upper_bound(first, shown.end(), std::pair{key, e.timestamp_utc},
                                  [](const std::pair<std::uint64_t, std::int64_t>& k, const HitRef& h) {
                                    return k.first != h.key ? k.first < h.key : k.second < h.t;
                                  });
    if (after == first) {
      ++out.excluded[reason_prefix];
      continue;
    }
    const HitRef& hit = *std::prev(after);
    const std::int64_t lag = e.timestamp_utc - hit.t;
    if (lag > windows.for_type(e.event_type)) {
      ++out.excluded[reason_prefix];
      continue;
    }
    const Event& h = log[hit.index];
    Attribution a;
    a.interaction_index = i;
    a.hit_index = hit.index;
    a.interaction_id = e.event_id;
    a.hit_id = h.event_id;
    a.type = e.event_type;
    a.lag_ms = lag;
    a.cell = cell_of(h);
    if (e.event_type == EventType::Click && (e.excluded_from_metrics || h.excluded_from_metrics)) {
      a.counts_for_ctr = false;
      ++out.excluded["click_excluded_new_customer"];
    }
    if (e.event_type == EventType::Buy && e.unit_price)
      a.line_amount = Money{e.unit_price->amount * e.quantity, e.unit_price->currency};
    out.pairs.push_back(std::move(a));
  }
  return out;
}

void CellMetrics::add(const CellMetrics& o) {
  hits += o.hits;
  ctr_hits += o.ctr_hits;
  clicks += o.clicks;
  atcs += o.atcs;
  buys += o.buys;
  revenue += o.revenue;
}

void CellMetrics::finalize() {
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  ctr = ratio(clicks, ctr_hits);
  atc_tr = ratio(atcs, hits);
  btr = ratio(buys, hits);
}

Json CellMetrics::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return {{"hits", hits},   {"ctr_hits", ctr_hits}, {"clicks", clicks},     {"atcs", atcs},      {"buys", buys},
          {"ctr", opt(ctr)}, {"atc_tr", opt(atc_tr)}, {"btr", opt(btr)}, {"revenue", revenue}};
}

std::map<std::int64_t, std::optional<double>> MetricsReport::daily_ctr(const std::string& segment) const {
  std::map<std::int64_t, CellMetrics> by_day;
  for (const auto& [key, m] : cells)
    if (segment.empty() || key.segment == segment) by_day[key.day].add(m);
  std::map<std::int64_t, std::optional<double>> out;
  for (auto& [day, m] : by_day) {
    m.finalize();
    out[day] = m.ctr;
  }
  return out;
}

namespace {

std::string iso_date(std::int64_t day) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

Json MetricsReport::to_json() const {
  Json cell_list = Json::array();
  for (const auto& [key, m] : cells) {
    Json j = m.to_json();
    j["day"] = key.day;
    j["date"] = iso_date(key.day);
    j["page_type"] = to_string(key.page_type);
    j["widget_id"] = key.widget_id;
    j["segment"] = key.segment;
    cell_list.push_back(std::move(j));
  }
  Json flags = Json::array();
  for (const auto& f : low_visibility)
    flags.push_back({{"page_type", to_string(f.page_type)},
                     {"widget_id", f.widget_id},
                     {"ctr", f.ctr},
                     {"site_median_ctr", f.site_median_ctr}});
  return {{"schema_version", kSchemaVersion}, {"cells", cell_list}, {"totals", totals.to_json()}, {"low_visibility", flags}};
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "date,day,page_type,widget_id,segment,hits,ctr_hits,clicks,atcs,buys,ctr,atc_tr,btr,revenue\n";
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v).dump() : std::string(); };
  for (const auto& [key, m] : cells) {
    out << iso_date(key.day) << ',' << key.day << ',' << to_string(key.page_type) << ',' << key.widget_id << ','
        << key.segment << ',' << m.hits << ',' << m.ctr_hits << ',' << m.clicks << ',' << m.atcs << ',' << m.buys << ','
        << opt(m.ctr) << ',' << opt(m.atc_tr) << ',' << opt(m.btr) << ',' << Json(m.revenue).dump() << '\n';
  }
  return out.str();
}

MetricsReport rates(const AttributionSet& attr) {
  MetricsReport report;
  for (const auto& [key, counts] : attr.eligible_hits) {
    auto& cell = report.cells[key];
    cell.hits = counts.hits;
    cell.ctr_hits = counts.ctr_hits;
  }
  for (const auto& a : attr.pairs) {
    auto& cell = report.cells[a.cell];
    switch (a.type) {
      case EventType::Click:
        if (a.counts_for_ctr) ++cell.clicks;
        break;
      case EventType::Atc: ++cell.atcs; break;
      case EventType::Buy:
        ++cell.buys;
        if (a.line_amount) cell.revenue += a.line_amount->amount;
        break;
      case EventType::Hit: break;
    }
  }
  for (auto& [key, cell] : report.cells) {
    cell.finalize();
    report.totals.add(cell);
  }
  report.totals.finalize();
  return report;
}

double conversion_revenue(const AttributionSet& attr, const EventLog& log) {
  const std::string& base = log.metadata().base_currency;
  std::optional<std::string> seen;
  double total = 0.0;
  for (const auto& a : attr.pairs) {
    if (a.type != EventType::Buy) continue;
    const Event& e = log[a.interaction_index];
    if (!e.unit_price) throw Error(ErrorCode::MissingPrice, "attributed buy " + e.event_id + " has no price");
    const auto& currency = e.unit_price->currency;
    if (!base.empty() && currency != base)
      throw Error(ErrorCode::MissingPrice, "buy " + e.event_id + " priced in " + currency + ", not normalized to " + base);
    if (seen && *seen != currency)
      throw Error(ErrorCode::MissingPrice, "attributed buys mix " + *seen + " and " + currency + "; normalize first");
    seen = currency;
    total += e.unit_price->amount * e.quantity;
  }
  return total;
}

std::vector<VisibilityFlag> flag_low_visibility(const MetricsReport& report, double fraction) {
  std::map<std::pair<PageType, std::string>, CellMetrics> by_widget;
  for (const auto& [key, m] : report.cells) by_widget[{key.page_type, key.widget_id}].add(m);

  std::vector<std::pair<std::pair<PageType, std::string>, double>> ctrs;
  for (auto& [key, m] : by_widget) {
    m.finalize();
    if (m.ctr) ctrs.emplace_back(key, *m.ctr);
  }
  if (ctrs.size() < 2) throw Error(ErrorCode::InsufficientCells, "need at least two page/widget cells with hits");

  std::vector<double> values;
  for (const auto& c : ctrs) values.push_back(c.second);
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  const double med = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;

  std::vector<VisibilityFlag> flags;
  for (const auto& [key, ctr] : ctrs)
    if (ctr < fraction * med) flags.push_back({key.first, key.second, ctr, med});
  return flags;
}

}  // namespace clickprep
