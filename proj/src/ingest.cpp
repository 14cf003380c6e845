#include "clickprep/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <unordered_map>

namespace clickprep {

InputFormat parse_input_format(std::string_view name) {
  if (name == "jsonl" || name == "JSONL") return InputFormat::Jsonl;
  if (name == "csv" || name == "CSV") return InputFormat::Csv;
  throw Error(ErrorCode::UnknownFormat, std::string(name));
}

namespace {

// RFC-4180 style field splitting for a single physical line ("" escapes a
// quote inside a quoted field). Embedded newlines are not supported.
std::optional<std::vector<std::string>> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool after_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (c == '"' && field.empty() && !after_quote) {
      quoted = true;
    } else {
      if (after_quote) return std::nullopt;
      field.push_back(c);
    }
  }
  if (quoted) return std::nullopt;
  fields.push_back(std::move(field));
  return fields;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

ParseResult parse_events(std::istream& in, InputFormat format, const ValidateOptions& options,
                         std::string source_name) {
  if (!in.good() && !in.eof()) throw Error(ErrorCode::UnreadableStream, "input stream is not readable");

  ParseResult result;
  std::vector<Event> accepted;
  std::set<std::string> seen_ids;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;

  auto accept = [&](const Json& raw, std::size_t at) {
    auto outcome = validate_event(raw, options);
    if (auto* rej = std::get_if<Rejection>(&outcome)) {
      result.rejects.push_back({at, rej->code, rej->message});
      return;
    }
    auto& ev = std::get<Event>(outcome);
    if (!seen_ids.insert(ev.event_id).second) {
      result.rejects.push_back({at, ErrorCode::DuplicateEventId, "event_id '" + ev.event_id + "' repeated"});
      return;
    }
    accepted.push_back(std::move(ev));
  };

  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (blank(line)) continue;

    if (format == InputFormat::Jsonl) {
      Json raw = Json::parse(line, nullptr, /*allow_exceptions=*/false);
      if (raw.is_discarded()) {
        result.rejects.push_back({line_no, ErrorCode::MalformedRecord, "line is not valid JSON"});
        continue;
      }
      accept(raw, line_no);
      continue;
    }

    auto fields = split_csv_line(line);
    if (header.empty()) {
      if (!fields) throw Error(ErrorCode::UnreadableStream, "CSV header row is malformed");
      header = std::move(*fields);
      std::set<std::string> names(header.begin(), header.end());
      if (names.size() != header.size()) throw Error(ErrorCode::UnreadableStream, "CSV header repeats a column");
      if (!names.count("event_type") || !names.count("timestamp_utc"))
        throw Error(ErrorCode::UnreadableStream, "CSV header must name event_type and timestamp_utc columns");
      continue;
    }
    if (!fields || fields->size() != header.size()) {
      result.rejects.push_back({line_no, ErrorCode::MalformedRecord, "column count does not match header"});
      continue;
    }
    Json raw = Json::object();
    for (std::size_t i = 0; i < header.size(); ++i) raw[header[i]] = (*fields)[i];
    accept(raw, line_no);
  }
  if (in.bad()) throw Error(ErrorCode::UnreadableStream, "read error after line " + std::to_string(line_no));

  result.log = EventLog(std::move(accepted), LogMetadata{std::move(source_name), 0, {}});
  return result;
}

void write_jsonl(std::ostream& out, const EventLog& log) {
  for (const auto& e : log) out << to_json(e).dump() << '\n';
}

void write_rejects_jsonl(std::ostream& out, const std::vector<RejectedRow>& rejects) {
  for (const auto& r : rejects)
    out << Json{{"line", r.line}, {"error", to_string(r.code)}, {"message", r.message}}.dump() << '\n';
}

RateTable::RateTable(std::string base, std::map<std::string, double> rates)
    : base_(std::move(base)), rates_(std::move(rates)) {
  if (base_.size() != 3) throw Error(ErrorCode::InvalidRateTable, "base currency must be an ISO-4217 code");
  auto it = rates_.find(base_);
  if (it == rates_.end()) {
    rates_.emplace(base_, 1.0);
  } else if (it->second != 1.0) {
    throw Error(ErrorCode::InvalidRateTable, "rate of the base currency must be 1");
  }
  for (const auto& [code, rate] : rates_)
    if (!(rate > 0.0)) throw Error(ErrorCode::InvalidRateTable, "rate for " + code + " must be positive");
}

RateTable RateTable::from_json(const Json& j, std::optional<std::string> base_override) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidRateTable, "rate table must be a JSON object");
  std::map<std::string, double> rates;
  std::optional<std::string> base = base_override;
  const Json* table = &j;
  if (j.contains("rates")) {
    table = &j.at("rates");
    if (!base && j.contains("base")) base = j.at("base").get<std::string>();
  }
  if (!base) throw Error(ErrorCode::InvalidRateTable, "no base currency given");
  for (const auto& [code, rate] : table->items()) {
    if (!rate.is_number()) throw Error(ErrorCode::InvalidRateTable, "rate for " + code + " is not a number");
    rates[code] = rate.get<double>();
  }
  return RateTable(*base, std::move(rates));
}

double RateTable::rate(const std::string& currency) const {
  auto it = rates_.find(currency);
  if (it == rates_.end()) throw Error(ErrorCode::MissingRate, currency);
  return it->second;
}

EventLog normalize_currency(const EventLog& log, const RateTable& rates) {
  std::vector<Event> out(log.begin(), log.end());
  for (auto& e : out) {
    if (!e.unit_price) continue;
    e.unit_price->amount *= rates.rate(e.unit_price->currency);
    e.unit_price->currency = rates.base();
  }
  LogMetadata meta = log.metadata();
  meta.base_currency = rates.base();
  return EventLog(std::move(out), std::move(meta));
}

void DedupPolicy::validate() const {
  if (glitch_window_ms < 0 || session_gap_ms <= 0 || glitch_window_ms >= session_gap_ms)
    throw Error(ErrorCode::InvalidParams, "dedup policy requires 0 <= glitch_window < session_gap");
}

std::vector<std::size_t> session_ids(const EventLog& log, std::int64_t session_gap_ms) {
  std::vector<std::size_t> ids(log.size());
  struct Last {
    std::int64_t t;
    std::size_t session;
  };
  std::unordered_map<std::string, Last> last;
  std::size_t next = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log[i];
    auto [it, fresh] = last.try_emplace(e.customer_key(), Last{e.timestamp_utc, next});
    if (fresh) {
      ++next;
    } else if (e.timestamp_utc - it->second.t >= session_gap_ms) {
      it->second.session = next++;
    }
    it->second.t = e.timestamp_utc;
    ids[i] = it->second.session;
  }
  return ids;
}

namespace {

std::string dedup_key(const Event& e) {
  std::string key = e.customer_key();
  key += '\x1f';
  key += to_string(e.event_type);
  key += '\x1f';
  if (e.is_hit()) {
    key += to_string(e.page_type);
    key += '\x1f';
    key += e.widget_id.value_or("");
    key += '\x1f';
    key += std::to_string(e.page_number.value_or(0));
    for (const auto& s : e.recommended_products) {
      key += '\x1f';
      key += s.product_id;
    }
  } else {
    key += *e.product_id;
  }
  return key;
}

}  // namespace

DedupResult deduplicate(const EventLog& log, const DedupPolicy& policy) {
  policy.validate();
  const auto sessions = session_ids(log, policy.session_gap_ms);

  std::unordered_map<std::string, std::int64_t> last_kept;
  std::set<std::pair<std::string, std::size_t>> session_seen;
  std::vector<Event> kept;
  kept.reserve(log.size());
  std::size_t glitch = 0, session_repeat = 0, glitch_hits = 0;

  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log[i];
    auto key = dedup_key(e);
    auto it = last_kept.find(key);
    if (it != last_kept.end() && e.timestamp_utc - it->second <= policy.glitch_window_ms) {
      ++glitch;
      if (e.is_hit()) ++glitch_hits;
      continue;
    }
    if (e.event_type == EventType::Atc || e.event_type == EventType::Buy) {
      if (!session_seen.emplace(key, sessions[i]).second) {
        ++session_repeat;
        continue;
      }
    }
    last_kept[key] = e.timestamp_utc;
    kept.push_back(e);
  }

  DedupResult out{log.with_events(std::move(kept)), {}};
  const Json params = {{"glitch_window_ms", policy.glitch_window_ms}, {"session_gap_ms", policy.session_gap_ms}};
  out.report.rules.push_back({"dedup_glitch", glitch, 0, glitch_hits, params, {}});
  out.report.rules.push_back({"dedup_session_repeat", session_repeat, 0, 0, params, {}});
  return out;
}

}  // namespace clickprep
