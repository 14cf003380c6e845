#include "clickprep/event.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <set>
#include <unordered_set>

namespace clickprep {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingIdentity: return "MissingIdentity";
    case ErrorCode::MalformedTimestamp: return "MalformedTimestamp";
    case ErrorCode::HitWithoutProducts: return "HitWithoutProducts";
    case ErrorCode::NegativePrice: return "NegativePrice";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DuplicateEventId: return "DuplicateEventId";
    case ErrorCode::UnreadableStream: return "UnreadableStream";
    case ErrorCode::UnknownFormat: return "UnknownFormat";
    case ErrorCode::MissingRate: return "MissingRate";
    case ErrorCode::InvalidRateTable: return "InvalidRateTable";
    case ErrorCode::EmptyPopulation: return "EmptyPopulation";
    case ErrorCode::InsufficientPopulation: return "InsufficientPopulation";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::NoUnimodalLimit: return "NoUnimodalLimit";
    case ErrorCode::NoPurchases: return "NoPurchases";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::AlarmRefusal: return "AlarmRefusal";
    case ErrorCode::NoHits: return "NoHits";
    case ErrorCode::MissingPrice: return "MissingPrice";
    case ErrorCode::InsufficientCells: return "InsufficientCells";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::InfeasibleConfig: return "InfeasibleConfig";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::StageFailure: return "StageFailure";
    case ErrorCode::PortBusy: return "PortBusy";
    case ErrorCode::NoPopulationLoaded: return "NoPopulationLoaded";
  }
  return "Unknown";
}

std::string_view to_string(EventType t) {
  switch (t) {
    case EventType::Hit: return "HIT";
    case EventType::Click: return "CLICK";
    case EventType::Atc: return "ATC";
    case EventType::Buy: return "BUY";
  }
  return "HIT";
}

std::string_view to_string(PageType p) {
  switch (p) {
    case PageType::Home: return "HOME";
    case PageType::Plp: return "PLP";
    case PageType::Pdp: return "PDP";
    case PageType::Cart: return "CART";
  }
  return "HOME";
}

std::string_view to_string(Segment s) { return s == Segment::A1 ? "A1" : "A2"; }

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

}  // namespace

std::optional<EventType> parse_event_type(std::string_view s) {
  const auto u = upper(s);
  if (u == "HIT") return EventType::Hit;
  if (u == "CLICK") return EventType::Click;
  if (u == "ATC") return EventType::Atc;
  if (u == "BUY") return EventType::Buy;
  return std::nullopt;
}

std::optional<PageType> parse_page_type(std::string_view s) {
  const auto u = upper(s);
  if (u == "HOME") return PageType::Home;
  if (u == "PLP") return PageType::Plp;
  if (u == "PDP") return PageType::Pdp;
  if (u == "CART") return PageType::Cart;
  return std::nullopt;
}

std::optional<Segment> parse_segment(std::string_view s) {
  const auto u = upper(s);
  if (u == "A1") return Segment::A1;
  if (u == "A2") return Segment::A2;
  return std::nullopt;
}

const std::string& Event::customer_key() const {
  static const std::string kEmpty;
  if (cust_id) return *cust_id;
  if (user_id) return *user_id;
  if (cookie_id) return *cookie_id;
  return kEmpty;
}

std::int64_t utc_day(std::int64_t timestamp_ms) noexcept {
  // floor division so pre-epoch timestamps land on the right day
  std::int64_t d = timestamp_ms / kMillisPerDay;
  if (timestamp_ms % kMillisPerDay < 0) --d;
  return d;
}

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::optional<int> read_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::optional<std::int64_t> parse_iso8601_ms(std::string_view text, std::optional<int> default_offset_minutes) {
  // YYYY-MM-DD[T ]HH:MM:SS[.fff][Z|+HH:MM|-HH:MM|+HHMM]
  if (text.size() < 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' ||
      text[16] != ':')
    return std::nullopt;
  auto y = read_int(text.substr(0, 4));
  auto mo = read_int(text.substr(5, 2));
  auto d = read_int(text.substr(8, 2));
  auto h = read_int(text.substr(11, 2));
  auto mi = read_int(text.substr(14, 2));
  auto s = read_int(text.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
  if (*h > 23 || *mi > 59 || *s > 60) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
  if (!ymd.ok()) return std::nullopt;

  std::size_t pos = 19;
  std::int64_t millis = 0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    auto frac = text.substr(start, pos - start);
    if (frac.empty()) return std::nullopt;
    std::string padded(frac.substr(0, 3));
    while (padded.size() < 3) padded.push_back('0');
    millis = *read_int(padded);
  }

  std::optional<int> offset_minutes;
  auto zone = text.substr(pos);
  if (zone.empty()) {
    offset_minutes = default_offset_minutes;
    if (!offset_minutes) return std::nullopt;
  } else if (zone == "Z" || zone == "z") {
    offset_minutes = 0;
  } else if (zone[0] == '+' || zone[0] == '-') {
    std::string digits;
    for (char c : zone.substr(1))
      if (c != ':') digits.push_back(c);
    if (digits.size() != 4 || !all_digits(digits)) return std::nullopt;
    int oh = *read_int(std::string_view(digits).substr(0, 2));
    int om = *read_int(std::string_view(digits).substr(2, 2));
    if (oh > 23 || om > 59) return std::nullopt;
    offset_minutes = (zone[0] == '-' ? -1 : 1) * (oh * 60 + om);
  } else {
    return std::nullopt;
  }

  const auto days = sys_days{ymd}.time_since_epoch().count();
  std::int64_t ms = static_cast<std::int64_t>(days) * kMillisPerDay + *h * kMillisPerHour + *mi * kMillisPerMinute +
                    *s * kMillisPerSecond + millis;
  return ms - static_cast<std::int64_t>(*offset_minutes) * kMillisPerMinute;
}

namespace {

struct Reject {
  ErrorCode code;
  std::string message;
};

// Reads an optional identifier-like field. Empty strings and null count as
// missing; integers are accepted and stringified.
std::optional<std::string> opt_string(const Json& raw, const char* key) {
  auto it = raw.find(key);
  if (it == raw.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) {
    auto s = it->get<std::string>();
    if (s.empty()) return std::nullopt;
    return s;
  }
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  throw Reject{ErrorCode::MalformedRecord, std::string("field '") + key + "' must be a string"};
}

std::optional<std::int64_t> opt_integer(const Json& raw, const char* key) {
  auto it = raw.find(key);
  if (it == raw.end() || it->is_null()) return std::nullopt;
  if (it->is_number_integer()) return it->get<std::int64_t>();
  if (it->is_number_float()) {
    double v = it->get<double>();
    if (std::floor(v) == v && std::isfinite(v)) return static_cast<std::int64_t>(v);
  }
  if (it->is_string()) {
    auto s = it->get<std::string>();
    if (s.empty()) return std::nullopt;
    std::int64_t v = 0;
    std::string_view sv = s;
    auto [p, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec == std::errc() && p == sv.data() + sv.size()) return v;
  }
  throw Reject{ErrorCode::MalformedRecord, std::string("field '") + key + "' must be an integer"};
}

std::optional<double> opt_number(const Json& raw, const char* key) {
  auto it = raw.find(key);
  if (it == raw.end() || it->is_null()) return std::nullopt;
  if (it->is_number()) return it->get<double>();
  if (it->is_string()) {
    auto s = it->get<std::string>();
    if (s.empty()) return std::nullopt;
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
  }
  throw Reject{ErrorCode::MalformedRecord, std::string("field '") + key + "' must be a number"};
}

std::int64_t read_timestamp(const Json& raw, const ValidateOptions& options) {
  auto it = raw.find("timestamp_utc");
  if (it == raw.end() || it->is_null()) throw Reject{ErrorCode::MalformedTimestamp, "timestamp_utc missing"};
  if (it->is_number_integer()) return it->get<std::int64_t>();
  if (it->is_string()) {
    const auto s = it->get<std::string>();
    if (all_digits(s) || (s.size() > 1 && s[0] == '-' && all_digits(std::string_view(s).substr(1)))) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec == std::errc()) return v;
    }
    if (auto ms = parse_iso8601_ms(s, options.default_offset_minutes)) return *ms;
    throw Reject{ErrorCode::MalformedTimestamp, "unparseable or zone-less timestamp '" + s + "'"};
  }
  throw Reject{ErrorCode::MalformedTimestamp, "timestamp_utc must be integer milliseconds or ISO-8601"};
}

std::vector<RecommendedSlot> read_slots(const Json& raw, bool slot_required) {
  std::vector<RecommendedSlot> slots;
  auto it = raw.find("recommended_products");
  if (it == raw.end() || it->is_null()) return slots;

  auto add = [&](std::string product, std::optional<int> slot) {
    if (product.empty()) throw Reject{ErrorCode::MalformedRecord, "empty product id in recommended_products"};
    if (!slot) {
      if (slot_required) throw Reject{ErrorCode::MalformedRecord, "PLP hit requires slot_index for every product"};
      slot = static_cast<int>(slots.size());
    }
    slots.push_back({std::move(product), *slot});
  };

  if (it->is_string()) {
    // CSV encoding: "p1:0|p2:1" or "p1|p2"
    const auto text = it->get<std::string>();
    if (text.empty()) return slots;
    std::size_t start = 0;
    while (start <= text.size()) {
      auto end = text.find('|', start);
      if (end == std::string::npos) end = text.size();
      auto item = std::string_view(text).substr(start, end - start);
      auto colon = item.rfind(':');
      if (colon != std::string_view::npos) {
        auto slot = read_int(item.substr(colon + 1));
        if (!slot) throw Reject{ErrorCode::MalformedRecord, "bad slot index in '" + std::string(item) + "'"};
        add(std::string(item.substr(0, colon)), slot);
      } else {
        add(std::string(item), std::nullopt);
      }
      start = end + 1;
    }
  } else if (it->is_array()) {
    for (const auto& item : *it) {
      if (item.is_string()) {
        add(item.get<std::string>(), std::nullopt);
      } else if (item.is_object()) {
        auto pid = opt_string(item, "product_id");
        if (!pid) throw Reject{ErrorCode::MalformedRecord, "recommended product without product_id"};
        auto slot = opt_integer(item, "slot_index");
        add(*pid, slot ? std::optional<int>(static_cast<int>(*slot)) : std::nullopt);
      } else {
        throw Reject{ErrorCode::MalformedRecord, "recommended_products entries must be strings or objects"};
      }
    }
  } else {
    throw Reject{ErrorCode::MalformedRecord, "recommended_products must be a list"};
  }

  std::set<int> seen;
  int lowest = slots.empty() ? 0 : slots.front().slot_index;
  for (const auto& s : slots) {
    if (s.slot_index < 0 || !seen.insert(s.slot_index).second)
      throw Reject{ErrorCode::MalformedRecord, "slot_index values must be distinct and non-negative"};
    lowest = std::min(lowest, s.slot_index);
  }
  if (!slots.empty() && lowest != 0) throw Reject{ErrorCode::MalformedRecord, "slot_index values must start at 0"};
  return slots;
}

std::optional<Money> read_price(const Json& raw) {
  std::optional<double> amount;
  std::optional<std::string> currency;
  auto it = raw.find("unit_price");
  if (it != raw.end() && it->is_object()) {
    amount = opt_number(*it, "amount");
    currency = opt_string(*it, "currency");
  } else if (it != raw.end() && !it->is_null()) {
    throw Reject{ErrorCode::MalformedRecord, "unit_price must be an object {amount, currency}"};
  } else {
    amount = opt_number(raw, "unit_price_amount");
    currency = opt_string(raw, "unit_price_currency");
  }
  if (!amount && !currency) return std::nullopt;
  if (!amount || !currency) throw Reject{ErrorCode::MalformedRecord, "unit_price needs both amount and currency"};
  if (*amount < 0) throw Reject{ErrorCode::NegativePrice, "unit_price amount " + std::to_string(*amount)};
  auto code = upper(*currency);
  if (code.size() != 3 || !std::all_of(code.begin(), code.end(), [](unsigned char c) { return std::isalpha(c); }))
    throw Reject{ErrorCode::MalformedRecord, "currency must be an ISO-4217 code, got '" + *currency + "'"};
  return Money{*amount, code};
}

bool read_bool(const Json& raw, const char* key) {
  auto it = raw.find(key);
  if (it == raw.end() || it->is_null()) return false;
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_string()) {
    auto s = upper(it->get<std::string>());
    if (s.empty() || s == "FALSE" || s == "0") return false;
    if (s == "TRUE" || s == "1") return true;
  }
  throw Reject{ErrorCode::MalformedRecord, std::string("field '") + key + "' must be boolean"};
}

Event build_event(const Json& raw, const ValidateOptions& options) {
  if (!raw.is_object()) throw Reject{ErrorCode::MalformedRecord, "record is not an object"};

  Event e;
  auto type = opt_string(raw, "event_type");
  if (!type) throw Reject{ErrorCode::MalformedRecord, "event_type missing"};
  auto parsed_type = parse_event_type(*type);
  if (!parsed_type) throw Reject{ErrorCode::MalformedRecord, "unknown event_type '" + *type + "'"};
  e.event_type = *parsed_type;

  e.cookie_id = opt_string(raw, "cookie_id");
  e.user_id = opt_string(raw, "user_id");
  if (!e.cookie_id && !e.user_id) throw Reject{ErrorCode::MissingIdentity, "both cookie_id and user_id are missing"};
  e.cust_id = opt_string(raw, "cust_id");

  auto page = opt_string(raw, "page_type");
  if (page) {
    auto p = parse_page_type(*page);
    if (!p) throw Reject{ErrorCode::MalformedRecord, "unknown page_type '" + *page + "'"};
    e.page_type = *p;
  } else if (e.is_hit()) {
    throw Reject{ErrorCode::MalformedRecord, "HIT requires page_type"};
  } else {
    e.page_type = PageType::Pdp;
  }

  e.product_id = opt_string(raw, "product_id");
  e.recommended_products = read_slots(raw, e.is_hit() && e.page_type == PageType::Plp);
  if (e.is_hit()) {
    if (e.recommended_products.empty()) throw Reject{ErrorCode::HitWithoutProducts, "HIT has no recommended products"};
    if (e.product_id) throw Reject{ErrorCode::MalformedRecord, "HIT must not carry product_id"};
  } else {
    if (!e.product_id) throw Reject{ErrorCode::MalformedRecord, "interaction requires product_id"};
    if (!e.recommended_products.empty())
      throw Reject{ErrorCode::MalformedRecord, "only HIT events carry recommended_products"};
  }

  e.unit_price = read_price(raw);

  auto id = opt_string(raw, "event_id");
  if (!id) throw Reject{ErrorCode::MalformedRecord, "event_id missing"};
  e.event_id = *id;
  e.timestamp_utc = read_timestamp(raw, options);

  if (auto pn = opt_integer(raw, "page_number")) {
    if (*pn < 1) throw Reject{ErrorCode::MalformedRecord, "page_number must be positive"};
    if (e.page_type != PageType::Plp) throw Reject{ErrorCode::MalformedRecord, "page_number only applies to PLP"};
    e.page_number = static_cast<int>(*pn);
  }
  e.widget_id = opt_string(raw, "widget_id");
  if (auto q = opt_integer(raw, "quantity")) {
    if (*q < 1) throw Reject{ErrorCode::MalformedRecord, "quantity must be positive"};
    e.quantity = static_cast<int>(*q);
  }
  e.user_agent = opt_string(raw, "user_agent");
  e.ip = opt_string(raw, "ip");
  if (auto seg = opt_string(raw, "segment_flag")) {
    auto s = parse_segment(*seg);
    if (!s) throw Reject{ErrorCode::MalformedRecord, "unknown segment_flag '" + *seg + "'"};
    e.segment_flag = *s;
  }
  e.excluded_from_metrics = read_bool(raw, "excluded_from_metrics");
  return e;
}

}  // namespace

std::variant<Event, Rejection> validate_event(const Json& raw, const ValidateOptions& options) {
  try {
    return build_event(raw, options);
  } catch (const Reject& r) {
    return Rejection{r.code, r.message};
  } catch (const std::exception& ex) {
    return Rejection{ErrorCode::MalformedRecord, ex.what()};
  }
}

Json to_json(const Event& e) {
  Json j = Json::object();
  j["event_id"] = e.event_id;
  j["event_type"] = to_string(e.event_type);
  j["timestamp_utc"] = e.timestamp_utc;
  if (e.cookie_id) j["cookie_id"] = *e.cookie_id;
  if (e.user_id) j["user_id"] = *e.user_id;
  if (e.cust_id) j["cust_id"] = *e.cust_id;
  if (e.product_id) j["product_id"] = *e.product_id;
  if (!e.recommended_products.empty()) {
    Json slots = Json::array();
    for (const auto& s : e.recommended_products) slots.push_back({{"product_id", s.product_id}, {"slot_index", s.slot_index}});
    j["recommended_products"] = std::move(slots);
  }
  j["page_type"] = to_string(e.page_type);
  if (e.page_number) j["page_number"] = *e.page_number;
  if (e.widget_id) j["widget_id"] = *e.widget_id;
  j["quantity"] = e.quantity;
  if (e.unit_price) j["unit_price"] = {{"amount", e.unit_price->amount}, {"currency", e.unit_price->currency}};
  if (e.user_agent) j["user_agent"] = *e.user_agent;
  if (e.ip) j["ip"] = *e.ip;
  if (e.segment_flag) j["segment_flag"] = to_string(*e.segment_flag);
  if (e.excluded_from_metrics) j["excluded_from_metrics"] = true;
  return j;
}

EventLog::EventLog(std::vector<Event> events, LogMetadata metadata)
    : events_(std::move(events)), metadata_(std::move(metadata)) {
  std::sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
    if (a.timestamp_utc != b.timestamp_utc) return a.timestamp_utc < b.timestamp_utc;
    return a.event_id < b.event_id;
  });
  std::unordered_set<std::string_view> ids;
  ids.reserve(events_.size());
  for (const auto& e : events_)
    if (!ids.insert(e.event_id).second) throw Error(ErrorCode::DuplicateEventId, e.event_id);
}

EventLog EventLog::with_metadata(LogMetadata metadata) const {
  EventLog copy = *this;
  copy.metadata_ = std::move(metadata);
  return copy;
}

void CleaningReport::append(const CleaningReport& other) {
  rules.insert(rules.end(), other.rules.begin(), other.rules.end());
}

std::size_t CleaningReport::total_removed() const noexcept {
  std::size_t n = 0;
  for (const auto& r : rules) n += r.records_removed;
  return n;
}

Json CleaningReport::to_json() const {
  Json out = Json::array();
  for (const auto& r : rules) {
    Json j = {{"rule", r.rule},
              {"records_removed", r.records_removed},
              {"customers_flagged", r.customers_flagged},
              {"hits_removed", r.hits_removed},
              {"parameters", r.parameters}};
    if (!r.details.empty()) j["details"] = r.details;
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace clickprep
