#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "clickprep/error.hpp"

namespace clickprep {

using Json = nlohmann::json;

constexpr std::int64_t kMillisPerSecond = 1000;
constexpr std::int64_t kMillisPerMinute = 60 * kMillisPerSecond;
constexpr std::int64_t kMillisPerHour = 60 * kMillisPerMinute;
constexpr std::int64_t kMillisPerDay = 24 * kMillisPerHour;

enum class EventType { Hit, Click, Atc, Buy };
enum class PageType { Home, Plp, Pdp, Cart };
enum class Segment { A1, A2 };

std::string_view to_string(EventType t);
std::string_view to_string(PageType p);
std::string_view to_string(Segment s);
std::optional<EventType> parse_event_type(std::string_view s);
std::optional<PageType> parse_page_type(std::string_view s);
std::optional<Segment> parse_segment(std::string_view s);

struct RecommendedSlot {
  std::string product_id;
  int slot_index = 0;

  bool operator==(const RecommendedSlot&) const = default;
};

struct Money {
  double amount = 0.0;
  std::string currency;

  bool operator==(const Money&) const = default;
};

/// One timestamped visitor action. A HIT is one widget impression carrying the
/// ordered list of recommended products; CLICK/ATC/BUY reference one product.
struct Event {
  std::string event_id;
  EventType event_type = EventType::Hit;
  std::int64_t timestamp_utc = 0;  // ms since epoch
  std::optional<std::string> cookie_id;
  std::optional<std::string> user_id;
  std::optional<std::string> cust_id;
  std::optional<std::string> product_id;
  std::vector<RecommendedSlot> recommended_products;
  PageType page_type = PageType::Home;
  std::optional<int> page_number;
  std::optional<std::string> widget_id;
  int quantity = 1;
  std::optional<Money> unit_price;
  std::optional<std::string> user_agent;
  std::optional<std::string> ip;
  std::optional<Segment> segment_flag;
  // Set by the new-customer rule; the event stays in the log but does not
  // count toward CTR.
  bool excluded_from_metrics = false;

  bool is_hit() const noexcept { return event_type == EventType::Hit; }
  bool is_interaction() const noexcept { return event_type != EventType::Hit; }

  /// Resolved customer key: cust_id, falling back to user_id then cookie_id.
  const std::string& customer_key() const;

  bool operator==(const Event&) const = default;
};

/// UTC day index (days since epoch) of a timestamp.
std::int64_t utc_day(std::int64_t timestamp_ms) noexcept;

struct Rejection {
  ErrorCode code;
  std::string message;
};

struct ValidateOptions {
  // Applied to ISO-8601 timestamps without a zone designator; without it such
  // timestamps are rejected.
  std::optional<int> default_offset_minutes;
};

/// Turns one raw record (a JSON object of field name -> value; CSV rows arrive
/// as string-valued objects) into an Event or a typed rejection. Total: never
/// throws.
std::variant<Event, Rejection> validate_event(const Json& raw, const ValidateOptions& options = {});

/// Parses "2024-01-01T10:00:00Z", "...+05:30", fractional seconds allowed.
std::optional<std::int64_t> parse_iso8601_ms(std::string_view text, std::optional<int> default_offset_minutes);

Json to_json(const Event& e);

struct LogMetadata {
  std::string source;
  std::int64_t ingested_at = 0;
  std::string base_currency;

  bool operator==(const LogMetadata&) const = default;
};

/// Immutable, time-ordered event collection. Ordering is (timestamp_utc,
/// event_id) so that any permutation of the same events yields the same log.
class EventLog {
 public:
  EventLog() = default;
  /// Throws Error(DuplicateEventId) when two events share an id.
  explicit EventLog(std::vector<Event> events, LogMetadata metadata = {});

  std::span<const Event> events() const noexcept { return events_; }
  const LogMetadata& metadata() const noexcept { return metadata_; }
  std::size_t size() const noexcept { return events_.size(); }
  bool empty() const noexcept { return events_.empty(); }
  const Event& operator[](std::size_t i) const { return events_[i]; }

  auto begin() const noexcept { return events_.cbegin(); }
  auto end() const noexcept { return events_.cend(); }

  EventLog with_events(std::vector<Event> events) const { return EventLog(std::move(events), metadata_); }
  EventLog with_metadata(LogMetadata metadata) const;

  bool operator==(const EventLog&) const = default;

 private:
  std::vector<Event> events_;
  LogMetadata metadata_;
};

/// One rule's contribution to a cleaning run.
struct RuleOutcome {
  std::string rule;
  std::size_t records_removed = 0;
  std::size_t customers_flagged = 0;
  std::size_t hits_removed = 0;
  Json parameters = Json::object();
  Json details = Json::object();
};

struct CleaningReport {
  std::vector<RuleOutcome> rules;

  void append(const CleaningReport& other);
  std::size_t total_removed() const noexcept;
  Json to_json() const;
};

}  // namespace clickprep
