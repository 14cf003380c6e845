#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "builders.hpp"
#include "clickprep/outliers.hpp"

using namespace clickprep;
using namespace clickprep::testing;

namespace {

ActivityPopulation population(std::vector<std::int64_t> values) {
  ActivityPopulation pop;
  for (std::size_t i = 0; i < values.size(); ++i) pop.keys.push_back({"c" + std::to_string(i), 0});
  pop.values = std::move(values);
  return pop;
}

std::vector<std::int64_t> lognormal_counts(std::size_t n, std::int64_t cap, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> ln(1.0, 0.6);
  std::vector<std::int64_t> out;
  while (out.size() < n) {
    auto v = static_cast<std::int64_t>(std::ceil(ln(rng)));
    if (v <= cap) out.push_back(v);
  }
  return out;
}

BootlierParams quick(std::size_t k = 7, std::uint64_t seed = 42) {
  BootlierParams p;
  p.trim = k;
  p.iterations = 10'000;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(RobustStats, MedianAndMad) {
  EXPECT_EQ(mad(std::vector<double>{5, 5, 5}), 0.0);
  // median 2, deviations {1,1,0,0,2}
  EXPECT_EQ(mad(std::vector<double>{1, 1, 2, 2, 4}), 1.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_THROW(median({}), Error);
  EXPECT_THROW(mad(std::vector<double>{}), Error);
}

TEST(Hampel, LimitFormula) {
  EXPECT_NEAR(hampel_limit(1, 3.22), 10.548, 1e-3);
  EXPECT_NEAR(hampel_limit(1, 1.62), 5.8036, 1e-3);
  EXPECT_EQ(hampel_limit(7, 0), 7.0);
}

TEST(Hampel, ThresholdMonotoneInX) {
  const auto v = lognormal_counts(2000, 200, 9);
  std::vector<double> d(v.begin(), v.end());
  const double med = median(d), spread = mad(d);
  std::size_t flagged2 = 0, flagged3 = 0;
  for (double x : d) {
    flagged2 += x > hampel_limit(med, spread, 2);
    flagged3 += x > hampel_limit(med, spread, 3);
  }
  EXPECT_GE(flagged2, flagged3);
  for (double x : d) {
    if (x > hampel_limit(med, spread, 3)) {
      EXPECT_GT(x, hampel_limit(med, spread, 2));
    }
  }
}

TEST(Population, CountsClicksAndBuysPerCustomerDay) {
  EventLog log({click("a", "c1", kT0, "p"), click("b", "c1", kT0 + 10, "q"), click("d", "c1", kT0 + kMillisPerDay, "p"),
                buy("e", "c2", kT0, "p"), hit("h", "c3", kT0, {"p"})});
  auto views = build_population(log, ActivityMetric::ViewsPerDay);
  auto buys = build_population(log, ActivityMetric::BuysPerDay);
  std::vector<std::int64_t> v = views.values;
  std::sort(v.begin(), v.end());
  EXPECT_EQ(v, (std::vector<std::int64_t>{1, 2}));
  EXPECT_EQ(buys.values, (std::vector<std::int64_t>{1}));
  for (auto x : views.values) EXPECT_GE(x, 1);
}

TEST(BootlierParams, Validation) {
  auto p = quick();
  EXPECT_THROW(p.validate(10), Error);  // N floor is 2k+2 = 16 > 10
  p.iterations = 999;
  EXPECT_THROW(p.validate(5000), Error);
  auto buys = BootlierParams::defaults_for(ActivityMetric::BuysPerDay);
  EXPECT_EQ(buys.trim, 3u);
  EXPECT_EQ(buys.sample_size_for(820), 50u);
  EXPECT_EQ(BootlierParams::defaults_for(ActivityMetric::ViewsPerDay).sample_size_for(32'000), 320u);
  EXPECT_THROW(BootlierParams::from_json(Json{{"bogus", 1}}, p), Error);
  EXPECT_EQ(BootlierParams::from_json(Json{{"k", 3}, {"iters", 2000}}, p).trim, 3u);
}

TEST(Bootlier, ConstantPopulationGivesZeroStatistics) {
  const auto h = bootlier_histogram(std::vector<std::int64_t>(300, 4), quick());
  ASSERT_EQ(h.statistics.size(), 10'000u);
  for (double s : h.statistics) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(modality(h).verdict, Modality::Unimodal);
}

TEST(Bootlier, InsufficientPopulation) {
  auto p = quick();
  p.sample_size = 100;
  try {
    bootlier_histogram(std::vector<std::int64_t>(50, 1), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPopulation);
  }
}

TEST(Bootlier, DeterministicInSeed) {
  const auto v = lognormal_counts(3000, 40, 1);
  const auto a = bootlier_histogram(v, quick(7, 5));
  const auto b = bootlier_histogram(v, quick(7, 5));
  const auto c = bootlier_histogram(v, quick(7, 6));
  EXPECT_EQ(a.statistics, b.statistics);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_NE(a.statistics, c.statistics);
}

TEST(Bootlier, CleanPopulationIsUnimodal) {
  const auto v = lognormal_counts(500, 25, 2);
  auto p = quick();
  p.sample_size = 50;
  const auto h = bootlier_histogram(v, p);
  const auto m = modality(h);
  EXPECT_EQ(m.verdict, Modality::Unimodal);
  EXPECT_EQ(m.peak_count, 1u);
}

TEST(Bootlier, ExtremeValueBreaksUnimodality) {
  auto v = lognormal_counts(500, 25, 2);
  const auto top = *std::max_element(v.begin(), v.end());
  v.push_back(100 * top);
  auto p = quick();
  p.sample_size = 50;
  const auto m = modality(bootlier_histogram(v, p));
  EXPECT_NE(m.verdict, Modality::Unimodal);
  EXPECT_GT(m.peak_count, 1u);
  // Upper-tail contamination puts the extra mode on the positive side.
  ASSERT_GE(m.peaks.size(), 2u);
  const auto far = std::max_element(m.peaks.begin(), m.peaks.end(),
                                    [](const DensityPeak& a, const DensityPeak& b) { return a.location < b.location; });
  EXPECT_GT(far->location, 0.0);
}

TEST(Modality, BimodalAndNoisyMixtures) {
  auto make = [](double weight, std::uint64_t seed) {
    BootlierHistogram h;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> a(0.0, 1.0), b(12.0, 1.0);
    std::bernoulli_distribution pick(weight);
    for (int i = 0; i < 20'000; ++i) h.statistics.push_back(pick(rng) ? b(rng) : a(rng));
    return h;
  };
  const auto two = modality(make(0.5, 1));
  EXPECT_EQ(two.verdict, Modality::Multimodal);
  EXPECT_EQ(two.peak_count, 2u);
  EXPECT_EQ(modality(make(0.03, 2)).verdict, Modality::Noisy);
  EXPECT_EQ(modality(make(0.0, 3)).verdict, Modality::Unimodal);
}

TEST(FindOutlierLimit, BracketsInjectedOutliers) {
  auto v = lognormal_counts(3000, 25, 4);
  const auto clean_max = *std::max_element(v.begin(), v.end());
  v.push_back(400);
  v.push_back(500);
  const auto d = find_outlier_limit(population(v), quick());
  EXPECT_GE(d.final_limit, clean_max);
  EXPECT_LE(d.final_limit, 399);
  ASSERT_FALSE(d.removal_trace.empty());
  EXPECT_EQ(d.removal_trace.back().candidate_limit, d.final_limit);
  EXPECT_EQ(d.removal_trace.back().verdict, Modality::Unimodal);
  EXPECT_EQ(d.customers_flagged.size(), 2u);
  EXPECT_GE(d.flagged_fraction, 0.0);
  EXPECT_LE(d.flagged_fraction, 1.0);
}

TEST(FindOutlierLimit, NoContaminationKeepsMaximumMostOfTheTime) {
  int kept = 0;
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const auto v = lognormal_counts(2000, 30, 100 + s);
    const auto top = *std::max_element(v.begin(), v.end());
    const auto d = find_outlier_limit(population(v), quick(7, s));
    kept += d.final_limit == top;
    std::vector<double> dv(v.begin(), v.end());
    EXPECT_GE(static_cast<double>(d.final_limit), median(dv));
  }
  EXPECT_GE(kept, 19);
}

TEST(FindOutlierLimit, TooSmallToStart) {
  ActivityPopulation pop;
  pop.metric = ActivityMetric::BuysPerDay;
  pop.values = {1, 1, 2, 1, 3, 1, 1, 2, 1, 9};
  try {
    find_outlier_limit(pop, BootlierParams::defaults_for(ActivityMetric::BuysPerDay));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientPopulation);
  }
}

TEST(FindOutlierLimit, DeterministicDecision) {
  auto v = lognormal_counts(2000, 25, 7);
  v.push_back(300);
  const auto a = find_outlier_limit(population(v), quick());
  const auto b = find_outlier_limit(population(v), quick());
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(OutlierDecision, JsonRoundTrip) {
  auto d = manual_decision(population({1, 2, 3, 50}), 10);
  EXPECT_TRUE(d.manual);
  EXPECT_EQ(d.customers_flagged, (std::set<std::string>{"c3"}));
  EXPECT_DOUBLE_EQ(d.flagged_fraction, 0.25);
  EXPECT_EQ(OutlierDecision::from_json(d.to_json()).to_json(), d.to_json());
}

TEST(ApplyOutlierFilter, RemovesWholeCustomerDayStrictlyAboveLimit) {
  std::vector<Event> events;
  for (int i = 0; i < 40; ++i) events.push_back(click("x" + std::to_string(i), "heavy", kT0 + i * 1000, "p"));
  events.push_back(hit("xh", "heavy", kT0 + 50'000, {"p"}));
  events.push_back(click("next", "heavy", kT0 + kMillisPerDay, "p"));
  for (int i = 0; i < 32; ++i) events.push_back(click("y" + std::to_string(i), "edge", kT0 + i * 1000, "p"));
  const EventLog log(events);
  auto pop = build_population(log, ActivityMetric::ViewsPerDay);
  const std::vector<OutlierDecision> decisions{manual_decision(pop, 32)};
  const auto r = apply_outlier_filter(log, decisions);
  std::size_t heavy = 0, edge = 0;
  for (const auto& e : r.log) {
    heavy += e.customer_key() == "heavy";
    edge += e.customer_key() == "edge";
  }
  EXPECT_EQ(heavy, 1u);  // only the next-day click survives
  EXPECT_EQ(edge, 32u);  // exactly at the limit is retained
  EXPECT_EQ(r.report.total_removed(), 41u);
}

TEST(NormalityProbe, Verdicts) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  std::vector<double> normal;
  for (int i = 0; i < 1000; ++i) normal.push_back(n01(rng));
  EXPECT_TRUE(normality_probe(normal).normal);

  std::vector<double> heavy;
  for (auto v : lognormal_counts(1000, 1000, 3)) heavy.push_back(static_cast<double>(v * v));
  const auto probe = normality_probe(heavy);
  EXPECT_FALSE(probe.normal);
  EXPECT_LT(probe.qq_correlation, 0.95);

  EXPECT_FALSE(normality_probe(std::vector<double>(50, 3.0)).normal);
  EXPECT_THROW(normality_probe(std::vector<double>(5, 1.0)), Error);
}
