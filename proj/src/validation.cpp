#include "clickprep/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "clickprep/parallel.hpp"

namespace clickprep {

std::size_t SegmentMap::count(Segment s) const {
  return static_cast<std::size_t>(
      std::count_if(assignment.begin(), assignment.end(), [s](const auto& kv) { return kv.second == s; }));
}

Json SegmentMap::to_json() const {
  Json m = Json::object();
  for (const auto& [cust, seg] : assignment) m[cust] = to_string(seg);
  return {{"seed", seed}, {"a1", count(Segment::A1)}, {"a2", count(Segment::A2)}, {"assignment", m}};
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

SegmentMap assign_segments(const std::set<std::string>& cust_ids, std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, const std::string*>> ranked;
  ranked.reserve(cust_ids.size());
  const std::uint64_t salt = detail::mix_seed(seed);
  for (const auto& id : cust_ids) ranked.emplace_back(detail::mix_seed(fnv1a(id) ^ salt), &id);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : *a.second < *b.second;
  });
  SegmentMap out;
  out.seed = seed;
  const std::size_t half = (ranked.size() + 1) / 2;
  for (std::size_t i = 0; i < ranked.size(); ++i)
    out.assignment[*ranked[i].second] = i < half ? Segment::A1 : Segment::A2;
  return out;
}

EventLog ensure_segments(const EventLog& log, std::uint64_t seed) {
  std::map<std::string, Segment> known;
  std::set<std::string> all;
  for (const auto& e : log) {
    all.insert(e.customer_key());
    if (e.segment_flag) known.try_emplace(e.customer_key(), *e.segment_flag);
  }
  std::set<std::string> missing;
  for (const auto& c : all)
    if (!known.count(c)) missing.insert(c);
  if (missing.empty()) return log;

  const auto assigned = assign_segments(missing, seed);
  std::vector<Event> out(log.begin(), log.end());
  for (auto& e : out) {
    if (e.segment_flag) continue;
    auto it = known.find(e.customer_key());
    e.segment_flag = it != known.end() ? it->second : assigned.assignment.at(e.customer_key());
  }
  return log.with_events(std::move(out));
}

void AAThresholds::validate() const {
  if (!(diff_max > 0.0)) throw Error(ErrorCode::InvalidParams, "A/A diff_max must be > 0");
  if (!(corr_min >= -1.0 && corr_min <= 1.0)) throw Error(ErrorCode::InvalidParams, "A/A corr_min must be in [-1,1]");
  if (min_days < 2) throw Error(ErrorCode::InvalidParams, "A/A min_days must be >= 2");
}

Json AAThresholds::to_json() const { return {{"diff_max", diff_max}, {"corr_min", corr_min}, {"min_days", min_days}}; }

std::string_view to_string(AAVerdictKind v) { return v == AAVerdictKind::Consistent ? "CONSISTENT" : "INCONSISTENT"; }

Json AAVerdict::to_json() const {
  Json series = Json::array();
  for (std::size_t i = 0; i < a1.size(); ++i) {
    Json row = {{"ctr_a1", a1[i]}, {"ctr_a2", a2[i]}};
    if (i < days.size()) row["day"] = days[i];
    series.push_back(std::move(row));
  }
  return {{"verdict", to_string(verdict)},
          {"mean_relative_difference", mean_relative_difference},
          {"correlation", correlation ? Json(*correlation) : Json(nullptr)},
          {"degenerate", degenerate},
          {"days", series},
          {"thresholds", thresholds.to_json()}};
}

AAVerdict compare_aa(const std::vector<double>& a1, const std::vector<double>& a2, const AAThresholds& t) {
  t.validate();
  if (a1.size() != a2.size())
    throw Error(ErrorCode::SeriesTooShort, "A/A series differ in length (" + std::to_string(a1.size()) + " vs " +
                                               std::to_string(a2.size()) + ")");
  if (a1.size() < t.min_days)
    throw Error(ErrorCode::SeriesTooShort,
                std::to_string(a1.size()) + " days; at least " + std::to_string(t.min_days) + " required");

  AAVerdict v;
  v.a1 = a1;
  v.a2 = a2;
  v.thresholds = t;
  const double n = static_cast<double>(a1.size());

  double diff = 0.0;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    const double mid = (a1[i] + a2[i]) / 2.0;
    diff += mid == 0.0 ? 0.0 : std::abs(a1[i] - a2[i]) / mid;
  }
  v.mean_relative_difference = diff / n;

  const double m1 = std::accumulate(a1.begin(), a1.end(), 0.0) / n;
  const double m2 = std::accumulate(a2.begin(), a2.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    sxy += (a1[i] - m1) * (a2[i] - m2);
    sxx += (a1[i] - m1) * (a1[i] - m1);
    syy += (a2[i] - m2) * (a2[i] - m2);
  }
  if (sxx > 0.0 && syy > 0.0) {
    v.correlation = sxy / std::sqrt(sxx * syy);
  } else {
    v.degenerate = true;
  }

  const bool close = v.mean_relative_difference <= t.diff_max;
  const bool correlated = v.degenerate || *v.correlation >= t.corr_min;
  v.verdict = close && correlated ? AAVerdictKind::Consistent : AAVerdictKind::Inconsistent;
  return v;
}

AAVerdict compare_aa(const MetricsReport& report, std::size_t days, const AAThresholds& t) {
  const auto s1 = report.daily_ctr("A1");
  const auto s2 = report.daily_ctr("A2");
  std::set<std::int64_t> all;
  for (const auto& [d, v] : s1) all.insert(d);
  for (const auto& [d, v] : s2) all.insert(d);

  std::vector<std::int64_t> kept(all.begin(), all.end());
  if (days > 0 && kept.size() > days) kept.resize(days);

  std::vector<double> a1, a2;
  for (auto d : kept) {
    auto i1 = s1.find(d);
    auto i2 = s2.find(d);
    if (i1 == s1.end() || i2 == s2.end() || !i1->second || !i2->second)
      throw Error(ErrorCode::InsufficientData, "day " + std::to_string(d) + " lacks a CTR for one segment");
    a1.push_back(*i1->second);
    a2.push_back(*i2->second);
  }
  auto v = compare_aa(a1, a2, t);
  v.days = std::move(kept);
  return v;
}

}  // namespace clickprep
