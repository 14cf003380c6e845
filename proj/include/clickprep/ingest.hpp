#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "clickprep/event.hpp"

namespace clickprep {

enum class InputFormat { Jsonl, Csv };

/// Throws Error(UnknownFormat) for anything but "jsonl" / "csv".
InputFormat parse_input_format(std::string_view name);

struct RejectedRow {
  std::size_t line = 0;  // 1-based physical line in the input
  ErrorCode code = ErrorCode::MalformedRecord;
  std::string message;
};

struct ParseResult {
  EventLog log;
  std::vector<RejectedRow> rejects;
};

/// Reads every row through validate_event. Rows that fail validation (or
/// repeat an earlier event_id) land in `rejects`; the accepted events are
/// returned re-sorted by time.
ParseResult parse_events(std::istream& in, InputFormat format, const ValidateOptions& options = {},
                         std::string source_name = {});

/// Writes one canonical JSON object per line.
void write_jsonl(std::ostream& out, const EventLog& log);
void write_rejects_jsonl(std::ostream& out, const std::vector<RejectedRow>& rejects);

class RateTable {
 public:
  /// Rates convert one unit of the keyed currency into `base`. The base entry
  /// is added when absent; a base rate other than 1 or any rate <= 0 throws
  /// Error(InvalidRateTable).
  RateTable(std::string base, std::map<std::string, double> rates);

  /// Accepts {"base": "USD", "rates": {...}} or a bare {"EUR": 1.1, ...} map
  /// (the latter needs `base_override`).
  static RateTable from_json(const Json& j, std::optional<std::string> base_override = std::nullopt);

  const std::string& base() const noexcept { return base_; }
  const std::map<std::string, double>& rates() const noexcept { return rates_; }
  /// Throws Error(MissingRate) when the currency is unknown.
  double rate(const std::string& currency) const;

 private:
  std::string base_;
  std::map<std::string, double> rates_;
};

/// Converts every unit_price to the table's base currency. Throws
/// Error(MissingRate) naming the first currency without a rate.
EventLog normalize_currency(const EventLog& log, const RateTable& rates);

struct DedupPolicy {
  std::int64_t session_gap_ms = 30 * kMillisPerMinute;
  std::int64_t glitch_window_ms = 2 * kMillisPerSecond;

  void validate() const;
};

struct DedupResult {
  EventLog log;
  CleaningReport report;
};

/// Drops warehousing-glitch copies (same customer, product and type within the
/// glitch window of a retained event) and repeated ATC/BUY of one product
/// inside one session. The earliest event is always the one kept. HIT copies
/// are keyed by widget, page and the recommended list instead of a product.
DedupResult deduplicate(const EventLog& log, const DedupPolicy& policy = {});

/// Session index per event (same order as log.events()), computed per
/// customer key: a gap of at least `session_gap_ms` starts a new session.
std::vector<std::size_t> session_ids(const EventLog& log, std::int64_t session_gap_ms);

}  // namespace clickprep
