#include <gtest/gtest.h>

#include <sstream>

#include "builders.hpp"
#include "clickprep/ingest.hpp"

using namespace clickprep;
using namespace clickprep::testing;

TEST(ParseEvents, JsonlCollectsRejectsWithLineNumbers) {
  std::istringstream in(
      R"({"event_id":"a","event_type":"CLICK","timestamp_utc":1704067200000,"cookie_id":"c","product_id":"p"})"
      "\n\n"
      R"({"event_id":"b","event_type":"HIT","timestamp_utc":1704067200000,"cookie_id":"c","page_type":"HOME"})"
      "\n"
      "not json\n"
      R"({"event_id":"a","event_type":"CLICK","timestamp_utc":1704067200001,"cookie_id":"c","product_id":"p"})"
      "\n");
  auto r = parse_events(in, InputFormat::Jsonl);
  EXPECT_EQ(r.log.size(), 1u);
  ASSERT_EQ(r.rejects.size(), 3u);
  EXPECT_EQ(r.rejects[0].line, 3u);
  EXPECT_EQ(r.rejects[0].code, ErrorCode::HitWithoutProducts);
  EXPECT_EQ(r.rejects[1].line, 4u);
  EXPECT_EQ(r.rejects[1].code, ErrorCode::MalformedRecord);
  EXPECT_EQ(r.rejects[2].code, ErrorCode::DuplicateEventId);
}

TEST(ParseEvents, CsvWithSlotEncoding) {
  std::istringstream in(
      "event_id,event_type,timestamp_utc,cookie_id,page_type,page_number,recommended_products,product_id\n"
      "h1,HIT,2024-01-01T00:00:00Z,c1,PLP,1,p1:0|p2:1,\n"
      "k1,CLICK,1704067201000,c1,PDP,,,p2\n");
  auto r = parse_events(in, InputFormat::Csv);
  ASSERT_TRUE(r.rejects.empty()) << r.rejects.front().message;
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_EQ(r.log[0].recommended_products.size(), 2u);
  EXPECT_EQ(r.log[0].page_number, 1);
  EXPECT_EQ(r.log[1].product_id, "p2");
}

TEST(ParseEvents, JsonlRoundTrip) {
  EventLog log({hit("h", "c", kT0, {"a", "b"}), buy("b", "c", kT0 + 10, "a", 2, 3.5, "GBP")});
  std::ostringstream out;
  write_jsonl(out, log);
  std::istringstream in(out.str());
  auto r = parse_events(in, InputFormat::Jsonl);
  EXPECT_TRUE(r.rejects.empty());
  EXPECT_EQ(r.log.events().size(), 2u);
  EXPECT_EQ(r.log[1], log[1]);
}

TEST(ParseInputFormat, RejectsUnknown) {
  EXPECT_EQ(parse_input_format("csv"), InputFormat::Csv);
  EXPECT_THROW(parse_input_format("xml"), Error);
}

TEST(RateTable, NormalizesToBase) {
  RateTable rates("USD", {{"EUR", 1.1}});
  EventLog log({buy("b1", "c", kT0, "p", 1, 10.0, "EUR"), buy("b2", "c", kT0 + 1, "p", 1, 4.0, "USD")});
  auto n = normalize_currency(log, rates);
  EXPECT_NEAR(n[0].unit_price->amount, 11.0, 1e-12);
  EXPECT_EQ(n[0].unit_price->currency, "USD");
  EXPECT_EQ(n[1].unit_price->amount, 4.0);
  EXPECT_EQ(n.metadata().base_currency, "USD");
}

TEST(RateTable, MissingRateNamesCurrency) {
  RateTable rates("USD", {{"EUR", 1.1}});
  EventLog log({buy("b1", "c", kT0, "p", 1, 10.0, "JPY")});
  try {
    normalize_currency(log, rates);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingRate);
    EXPECT_NE(std::string(e.what()).find("JPY"), std::string::npos);
  }
}

TEST(RateTable, RejectsBadTables) {
  EXPECT_THROW(RateTable("USD", {{"USD", 2.0}}), Error);
  EXPECT_THROW(RateTable("USD", {{"EUR", 0.0}}), Error);
  auto t = RateTable::from_json(Json{{"base", "EUR"}, {"rates", {{"USD", 0.9}}}});
  EXPECT_EQ(t.base(), "EUR");
  EXPECT_EQ(t.rate("EUR"), 1.0);
  EXPECT_THROW(RateTable::from_json(Json{{"USD", 0.9}}), Error);
}

TEST(Deduplicate, DropsGlitchCopiesKeepingEarliest) {
  EventLog log({click("a", "c", kT0, "p"), click("b", "c", kT0 + 1500, "p"), click("z", "c", kT0 + 2000, "p"),
                click("d", "c", kT0 + 5000, "p"), click("e", "other", kT0 + 100, "p")});
  auto r = deduplicate(log);
  std::vector<std::string> ids;
  for (const auto& e : r.log) ids.push_back(e.event_id);
  // b and z fall within 2 s of the kept a; d is a fresh click.
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "e", "d"}));
  EXPECT_EQ(r.report.total_removed(), 2u);
}

TEST(Deduplicate, HitsKeyedByWidgetAndList) {
  EventLog log({hit("h1", "c", kT0, {"a", "b"}), hit("h2", "c", kT0 + 100, {"a", "b"}),
                hit("h3", "c", kT0 + 200, {"a", "b"}, PageType::Home, "w2"), hit("h4", "c", kT0 + 300, {"b", "a"})});
  auto r = deduplicate(log);
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.report.rules.front().hits_removed, 1u);
}

TEST(Deduplicate, RepeatedBuyInSessionIsDropped) {
  EventLog log({buy("b1", "c", kT0, "p"), buy("b2", "c", kT0 + 10 * kMillisPerMinute, "p"),
                buy("b3", "c", kT0 + 50 * kMillisPerMinute, "p")});
  auto r = deduplicate(log);
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_EQ(r.log[0].event_id, "b1");
  EXPECT_EQ(r.log[1].event_id, "b3");
}

TEST(Deduplicate, IsIdempotent) {
  std::vector<Event> events;
  for (int i = 0; i < 200; ++i)
    events.push_back(click("k" + std::to_string(i), "c" + std::to_string(i % 3), kT0 + i * 700, "p" + std::to_string(i % 4)));
  auto once = deduplicate(EventLog(events));
  auto twice = deduplicate(once.log);
  EXPECT_EQ(once.log, twice.log);
  EXPECT_EQ(twice.report.total_removed(), 0u);
}

TEST(SessionIds, SplitOnGap) {
  EventLog log({click("a", "c", kT0, "p"), click("b", "c", kT0 + 29 * kMillisPerMinute, "p"),
                click("d", "c", kT0 + 58 * kMillisPerMinute, "p")});
  auto s = session_ids(log, 30 * kMillisPerMinute);
  EXPECT_EQ(s[0], s[1]);
  EXPECT_EQ(s[1], s[2]);
  auto t = session_ids(log, 29 * kMillisPerMinute);
  EXPECT_NE(t[0], t[1]);
}
