#include <gtest/gtest.h>

#include <random>

#include "builders.hpp"
#include "clickprep/validation.hpp"

using namespace clickprep;
using namespace clickprep::testing;

namespace {

std::set<std::string> ids(std::size_t n) {
  std::set<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.insert("cust" + std::to_string(i));
  return out;
}

}  // namespace

TEST(Segments, ExactHalves) {
  for (std::size_t n : {1u, 2u, 7u, 100u, 1001u}) {
    const auto m = assign_segments(ids(n), 3);
    EXPECT_EQ(m.count(Segment::A1), (n + 1) / 2);
    EXPECT_EQ(m.count(Segment::A2), n / 2);
  }
}

TEST(Segments, DeterministicPerSeed) {
  EXPECT_EQ(assign_segments(ids(500), 9).assignment, assign_segments(ids(500), 9).assignment);
  EXPECT_NE(assign_segments(ids(500), 9).assignment, assign_segments(ids(500), 10).assignment);
}

TEST(Segments, EnsureKeepsExistingFlags) {
  Event h1 = hit("h1", "a", kT0, {"p"});
  h1.segment_flag = Segment::A2;
  const auto out = ensure_segments(EventLog({h1, hit("h2", "a", kT0 + 1, {"p"}), hit("h3", "b", kT0 + 2, {"p"})}), 1);
  EXPECT_EQ(out[0].segment_flag, Segment::A2);
  EXPECT_EQ(out[1].segment_flag, Segment::A2);
  EXPECT_TRUE(out[2].segment_flag.has_value());
}

TEST(CompareAA, Identical) {
  const std::vector<double> s = {0.05, 0.06, 0.07, 0.065, 0.055};
  const auto v = compare_aa(s, s);
  EXPECT_EQ(v.verdict, AAVerdictKind::Consistent);
  EXPECT_DOUBLE_EQ(v.mean_relative_difference, 0.0);
  EXPECT_NEAR(*v.correlation, 1.0, 1e-12);
}

TEST(CompareAA, MeanRelativeDifferenceOracle) {
  const std::vector<double> a1 = {0.10, 0.12, 0.08, 0.11, 0.09};
  const std::vector<double> a2 = {0.11, 0.12, 0.09, 0.10, 0.09};
  double expected = 0;
  for (std::size_t i = 0; i < a1.size(); ++i) expected += std::abs(a1[i] - a2[i]) / ((a1[i] + a2[i]) / 2);
  expected /= a1.size();
  EXPECT_NEAR(compare_aa(a1, a2).mean_relative_difference, expected, 1e-12);
}

TEST(CompareAA, ScaledSeriesFailsOnDifference) {
  const std::vector<double> a1 = {0.05, 0.06, 0.07, 0.065, 0.055};
  std::vector<double> a2;
  for (double x : a1) a2.push_back(x * 0.5);
  const auto v = compare_aa(a1, a2);
  EXPECT_NEAR(*v.correlation, 1.0, 1e-12);
  EXPECT_EQ(v.verdict, AAVerdictKind::Inconsistent);
}

TEST(CompareAA, UncorrelatedFailsOnCorrelation) {
  const auto v = compare_aa({0.05, 0.06, 0.05, 0.06, 0.05, 0.06}, {0.06, 0.05, 0.06, 0.05, 0.06, 0.05});
  EXPECT_LT(*v.correlation, 0.8);
  EXPECT_EQ(v.verdict, AAVerdictKind::Inconsistent);
}

TEST(CompareAA, ConstantSeriesDegenerate) {
  const auto v = compare_aa({0.05, 0.05, 0.05, 0.05, 0.05}, {0.05, 0.05, 0.05, 0.05, 0.05});
  EXPECT_TRUE(v.degenerate);
  EXPECT_FALSE(v.correlation);
  EXPECT_EQ(v.verdict, AAVerdictKind::Consistent);
  EXPECT_TRUE(v.to_json().at("correlation").is_null());
}

TEST(CompareAA, TooShort) {
  try {
    compare_aa({0.1, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.1, 0.1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SeriesTooShort);
  }
  EXPECT_THROW(compare_aa({0.1, 0.1, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.1, 0.1}), Error);
}

TEST(CompareAA, SymmetricProperty) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 0.2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a, b;
    for (int d = 0; d < 5 + trial % 7; ++d) {
      a.push_back(u(rng));
      b.push_back(u(rng));
    }
    const auto ab = compare_aa(a, b), ba = compare_aa(b, a);
    EXPECT_NEAR(ab.mean_relative_difference, ba.mean_relative_difference, 1e-12);
    EXPECT_EQ(ab.verdict, ba.verdict);
  }
}

TEST(CompareAA, FromReportMissingDay) {
  std::vector<Event> events;
  for (int d = 0; d < 5; ++d)
    for (int s = 0; s < 2; ++s) {
      if (d == 3 && s == 1) continue;
      Event h = hit("h" + std::to_string(d) + std::to_string(s), "c" + std::to_string(s), kT0 + d * kMillisPerDay, {"p"});
      h.segment_flag = s ? Segment::A2 : Segment::A1;
      events.push_back(h);
    }
  const auto report = rates(attribute(EventLog(events)));
  try {
    compare_aa(report);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
  }
  AAThresholds short_series;
  short_series.min_days = 3;
  EXPECT_EQ(compare_aa(report, 3, short_series).days.size(), 3u);
}
