#include <gtest/gtest.h>

#include "attribution_oracle.hpp"
#include "builders.hpp"
#include "clickprep/metrics.hpp"

using namespace clickprep;
using namespace clickprep::testing;

TEST(Attribution, ClickWindowBoundary) {
  const EventLog log({hit("h", "c", kT0, {"p", "q", "r"}), click("in", "c", kT0 + 299'000, "p"),
                      click("edge", "c", kT0 + 300'000, "q"), click("out", "c", kT0 + 301'000, "r")});
  const auto a = attribute(log);
  std::set<std::string> ids;
  for (const auto& p : a.pairs) ids.insert(p.interaction_id);
  EXPECT_EQ(ids, (std::set<std::string>{"in", "edge"}));
  EXPECT_EQ(a.excluded.at("unattributed_CLICK"), 1u);
}

TEST(Attribution, BuyWithinDay) {
  const auto a = attribute(EventLog({hit("h", "c", kT0, {"p"}), buy("b", "c", kT0 + 23 * kMillisPerHour, "p", 2, 10.0)}));
  ASSERT_EQ(a.pairs.size(), 1u);
  EXPECT_EQ(a.pairs[0].type, EventType::Buy);
  ASSERT_TRUE(a.pairs[0].line_amount);
  EXPECT_DOUBLE_EQ(a.pairs[0].line_amount->amount, 20.0);
}

TEST(Attribution, PlpGateHidesLowSlots) {
  std::vector<std::string> shown;
  for (int i = 0; i < 12; ++i) shown.push_back("p" + std::to_string(i));
  const EventLog log({hit("h", "c", kT0, shown, PageType::Plp), click("k9", "c", kT0 + 10, "p9"),
                      click("k3", "c", kT0 + 11, "p3")});
  const auto gated = attribute(log);
  ASSERT_EQ(gated.pairs.size(), 1u);
  EXPECT_EQ(gated.pairs[0].interaction_id, "k3");
  PlpGate off;
  off.enabled = false;
  EXPECT_EQ(attribute(log, {}, off).pairs.size(), 2u);
}

TEST(Attribution, LaterPagesExcluded) {
  Event h = hit("h", "c", kT0, {"p"}, PageType::Plp);
  h.page_number = 2;
  const auto a = attribute(EventLog({h, click("k", "c", kT0 + 1, "p")}));
  EXPECT_TRUE(a.pairs.empty());
  EXPECT_EQ(a.excluded.at("hit_gated"), 1u);
  EXPECT_TRUE(a.eligible_hits.empty());
}

TEST(Attribution, NeverShownOrOtherCustomer) {
  const auto a = attribute(EventLog({hit("h", "c", kT0, {"p"}), click("k1", "c", kT0 + 1, "zzz"), click("k2", "d", kT0 + 1, "p")}));
  EXPECT_TRUE(a.pairs.empty());
}

TEST(Attribution, MostRecentHitWins) {
  const auto a = attribute(EventLog({hit("h1", "c", kT0, {"p"}), hit("h2", "c", kT0 + 1000, {"p"}), click("k", "c", kT0 + 2000, "p")}));
  ASSERT_EQ(a.pairs.size(), 1u);
  EXPECT_EQ(a.pairs[0].hit_id, "h2");
  EXPECT_EQ(a.pairs[0].lag_ms, 1000);
}

TEST(Attribution, WindowsMustBeOrdered) {
  AttributionWindows w;
  w.click_ms = w.atc_ms + 1;
  EXPECT_THROW(attribute(EventLog(), w), Error);
}

TEST(Attribution, MatchesBruteForceOracle) {
  const AttributionWindows w;
  const PlpGate gate;
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const auto log = random_attribution_log(300 + seed * 40, seed, w);
    const auto fast = attribute(log, w, gate);
    const auto slow = brute_force_attribution(log, w, gate);
    ASSERT_EQ(fast.pairs.size(), slow.size()) << "seed " << seed;
    for (std::size_t i = 0; i < slow.size(); ++i) {
      EXPECT_EQ(fast.pairs[i].interaction_index, slow[i].interaction);
      EXPECT_EQ(fast.pairs[i].hit_index, slow[i].hit);
      EXPECT_EQ(fast.pairs[i].lag_ms, slow[i].lag);
    }
  }
}

TEST(Rates, CtrFromConstructedLog) {
  std::vector<Event> events;
  for (int i = 0; i < 1000; ++i) {
    const auto p = "p" + std::to_string(i);
    events.push_back(hit("h" + std::to_string(i), "c" + std::to_string(i % 50), kT0 + i * 1000, {p}));
    if (i < 81) events.push_back(click("k" + std::to_string(i), "c" + std::to_string(i % 50), kT0 + i * 1000 + 500, p));
  }
  const auto report = rates(attribute(EventLog(events)));
  EXPECT_EQ(report.totals.clicks, 81u);
  EXPECT_EQ(report.totals.hits, 1000u);
  EXPECT_DOUBLE_EQ(*report.totals.ctr, 0.081);
}

TEST(Rates, NewCustomerExclusionOnlyAffectsCtr) {
  Event h = hit("h1", "c", kT0, {"p"});
  h.excluded_from_metrics = true;
  Event k = click("k1", "c", kT0 + 1, "p");
  k.excluded_from_metrics = true;
  const auto report = rates(attribute(EventLog({h, k, hit("h2", "c", kT0 + 2, {"q"}), atc("a", "c", kT0 + 3, "p")})));
  EXPECT_EQ(report.totals.ctr_hits, 1u);
  EXPECT_EQ(report.totals.hits, 2u);
  EXPECT_EQ(report.totals.clicks, 0u);
  EXPECT_DOUBLE_EQ(*report.totals.atc_tr, 0.5);
}

TEST(Rates, EmptyCellHasNoRate) {
  CellMetrics m;
  m.finalize();
  EXPECT_FALSE(m.ctr);
  EXPECT_TRUE(m.to_json().at("ctr").is_null());
}

TEST(Rates, SymmetricSegments) {
  std::vector<Event> events;
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < 10; ++i) {
      Event h = hit("h" + std::to_string(s) + "_" + std::to_string(i), "c" + std::to_string(s), kT0 + i, {"p"});
      h.segment_flag = s ? Segment::A2 : Segment::A1;
      events.push_back(h);
    }
  events.push_back(click("k0", "c0", kT0 + 20, "p"));
  events.push_back(click("k1", "c1", kT0 + 20, "p"));
  const auto report = rates(attribute(EventLog(events)));
  const auto a1 = report.daily_ctr("A1"), a2 = report.daily_ctr("A2");
  EXPECT_EQ(a1, a2);
  EXPECT_DOUBLE_EQ(*a1.begin()->second, 0.1);
}

TEST(Rates, CsvAndJsonShape) {
  const auto report = rates(attribute(EventLog({hit("h", "c", kT0, {"p"}, PageType::Home, "home_top"), click("k", "c", kT0 + 1, "p")})));
  const auto csv = report.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "date,day,page_type,widget_id,segment,hits,ctr_hits,clicks,atcs,buys,ctr,atc_tr,btr,revenue");
  EXPECT_NE(csv.find("2024-01-01,19723,HOME,home_top,NONE,1,1,1,0,0,1"), std::string::npos);
  EXPECT_EQ(report.to_json().at("schema_version"), MetricsReport::kSchemaVersion);
}

TEST(Revenue, SumsAttributedBuys) {
  const EventLog log = EventLog({hit("h", "c", kT0, {"p"}), buy("b", "c", kT0 + 10, "p", 2, 10.0)}).with_metadata({"", 0, "USD"});
  EXPECT_DOUBLE_EQ(conversion_revenue(attribute(log), log), 20.0);
  const EventLog none = EventLog({hit("h", "c", kT0, {"p"})}).with_metadata({"", 0, "USD"});
  EXPECT_EQ(conversion_revenue(attribute(none), none), 0.0);
}

TEST(Revenue, MixedCurrenciesRefused) {
  const EventLog log({hit("h", "c", kT0, {"p", "q"}), buy("b1", "c", kT0 + 10, "p", 1, 10.0, "USD"),
                      buy("b2", "c", kT0 + 20, "q", 1, 10.0, "EUR")});
  try {
    conversion_revenue(attribute(log), log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingPrice);
  }
}

TEST(LowVisibility, FlagsWeakWidget) {
  std::vector<Event> events;
  int n = 0;
  auto add_widget = [&](const std::string& widget, int hits, int clicks) {
    for (int i = 0; i < hits; ++i) {
      const auto p = widget + std::to_string(i);
      events.push_back(hit("h" + std::to_string(n++), "c", kT0 + n, {p}, PageType::Home, widget));
      if (i < clicks) events.push_back(click("k" + std::to_string(n++), "c", kT0 + n, p));
    }
  };
  add_widget("weak", 1000, 5);     // 0.5%
  add_widget("a", 1000, 60);       // 6%
  add_widget("b", 1000, 60);
  add_widget("d", 1000, 70);
  const auto report = rates(attribute(EventLog(events)));
  const auto flags = flag_low_visibility(report);
  ASSERT_EQ(flags.size(), 1u);
  EXPECT_EQ(flags[0].widget_id, "weak");
  EXPECT_DOUBLE_EQ(flags[0].site_median_ctr, 0.06);
}

TEST(LowVisibility, UniformAndSingleCell) {
  std::vector<Event> events;
  for (int w = 0; w < 3; ++w)
    for (int i = 0; i < 10; ++i) {
      const auto id = std::to_string(w) + "_" + std::to_string(i);
      events.push_back(hit("h" + id, "c", kT0 + w * 100 + i, {"p" + id}, PageType::Home, "w" + std::to_string(w)));
      if (i == 0) events.push_back(click("k" + id, "c", kT0 + w * 100 + i, "p" + id));
    }
  EXPECT_TRUE(flag_low_visibility(rates(attribute(EventLog(events)))).empty());
  try {
    flag_low_visibility(rates(attribute(EventLog({hit("h", "c", kT0, {"p"})}))));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientCells);
  }
}
