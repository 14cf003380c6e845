// Acceptance suite: one PASS/FAIL line per primary criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "attribution_oracle.hpp"
#include "builders.hpp"
#include "clickprep/behavior.hpp"
#include "clickprep/identity.hpp"
#include "clickprep/ingest.hpp"
#include "clickprep/outliers.hpp"
#include "clickprep/pipeline.hpp"
#include "clickprep/synth.hpp"
#include "clickprep/validation.hpp"

using namespace clickprep;
using namespace clickprep::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

constexpr double kHampelTolerance = 0.15;
constexpr double kBootlierMaxSeconds = 60.0;
constexpr std::size_t kBootlierMinPass = 19;
constexpr double kFalsePositiveBudget = 0.005;
constexpr double kBounceLiftTarget = 6.70 / 0.83;  // percent
constexpr double kBounceLiftTolerance = 0.05;      // percentage points
constexpr double kDetectorFloor = 0.9;
constexpr std::size_t kAAMinConsistent = 19;
constexpr std::size_t kSeeds = 20;

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out.precision(digits);
  out << std::fixed << v;
  return out.str();
}

Outcome hampel_reproduction() {
  const double views = hampel_limit(1.0, 3.22, 2.0);
  const double buys = hampel_limit(1.0, 1.62, 2.0);
  const bool pass = std::abs(views - 10.5) <= kHampelTolerance && std::abs(buys - 5.83) <= kHampelTolerance &&
                    std::abs(views - 10.55) < 0.005 && std::abs(buys - 5.80) < 0.005;
  return {pass, "views " + fmt(views, 3) + " buys " + fmt(buys, 3)};
}

// Clean counts from a discrete Pareto tail truncated at 40, plus ten outliers
// between 10x and 12x the clean maximum.
Outcome bootlier_separation() {
  std::size_t ok = 0;
  double slowest = 0.0;
  std::string failures;
  for (std::uint64_t s = 1; s <= kSeeds; ++s) {
    std::mt19937_64 rng(1000 + s);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ActivityPopulation pop;
    std::int64_t clean_max = 0;
    for (int i = 0; i < 5000; ++i) {
      std::int64_t v;
      do v = static_cast<std::int64_t>(std::floor(std::pow(1.0 - u(rng), -1.0 / 1.2)));
      while (v > 40);
      pop.values.push_back(v);
      pop.keys.push_back({"c" + std::to_string(i), 0});
      clean_max = std::max(clean_max, v);
    }
    std::uniform_int_distribution<std::int64_t> outlier(10 * clean_max, 12 * clean_max);
    std::int64_t outlier_min = std::numeric_limits<std::int64_t>::max();
    for (int i = 0; i < 10; ++i) {
      const auto v = outlier(rng);
      outlier_min = std::min(outlier_min, v);
      pop.values.push_back(v);
      pop.keys.push_back({"o" + std::to_string(i), 0});
    }
    auto params = BootlierParams::defaults_for(ActivityMetric::ViewsPerDay);
    params.trim = 7;
    params.iterations = 50'000;
    params.seed = s;
    const auto t0 = std::chrono::steady_clock::now();
    bool good = false;
    try {
      const auto d = find_outlier_limit(pop, params);
      good = d.final_limit >= clean_max && d.final_limit < outlier_min;
    } catch (const Error&) {
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    slowest = std::max(slowest, dt);
    if (good && dt <= kBootlierMaxSeconds) ++ok;
    else failures += " " + std::to_string(s);
  }
  std::string detail = std::to_string(ok) + "/20 separated, slowest " + fmt(slowest, 2) + " s";
  if (!failures.empty()) detail += ", missed seeds" + failures;
  return {ok >= kBootlierMinPass, detail};
}

Outcome false_positive_budget() {
  const auto cfg = PipelineConfig::from_json(Json::object());
  double worst = 0.0;
  for (std::uint64_t s = 1; s <= kSeeds; ++s) {
    auto synth = SynthConfig::zero_pathology();
    synth.seed = s;
    const auto log = generate(synth).log;
    const auto r = run_pipeline(cfg, log);
    if (r.exit_code != kExitOk) return {false, "seed " + std::to_string(s) + " exited " + std::to_string(r.exit_code)};
    const double removed = 1.0 - static_cast<double>(r.log.size()) / static_cast<double>(log.size());
    worst = std::max(worst, removed);
  }
  return {worst <= kFalsePositiveBudget, "worst removal " + fmt(100.0 * worst, 3) + "% over 20 seeds"};
}

// 1,700 single-hit bounce visitors and 830 engaged customers with ten hits
// each; 670 of the engaged hits lead to a click.
Outcome bounce_lift() {
  std::vector<Event> events;
  std::size_t id = 0;
  auto next = [&] { return "e" + std::to_string(id++); };
  for (int b = 0; b < 1700; ++b) events.push_back(hit(next(), "b" + std::to_string(b), kT0 + b * 1000, {"p"}));
  std::size_t clicks = 0;
  for (int c = 0; c < 830; ++c) {
    const auto cust = "u" + std::to_string(c);
    for (int k = 0; k < 10; ++k) {
      const std::int64_t t = kT0 + c * 60'000 + k * 2'000;
      const auto product = "q" + std::to_string(k);
      events.push_back(hit(next(), cust, t, {product}));
      if (clicks < 670 && (c * 10 + k) % 12 == 0) {
        events.push_back(click(next(), cust, t + 500, product));
        ++clicks;
      }
    }
  }
  const EventLog log(events);
  const double pre = 100.0 * *rates(attribute(log)).totals.ctr;

  Json doc = PipelineConfig::default_json();
  for (const auto& s : pipeline_stages()) doc["stages"][s] = false;
  doc["stages"]["clean"] = true;
  doc["stages"]["metrics"] = true;
  doc["clean"]["rules"] = {"bounce"};
  const auto r = run_pipeline(PipelineConfig::from_json(doc), log);
  const double post = 100.0 * r.report["metrics"]["totals"]["ctr"].get<double>();
  const bool pass = clicks == 670 && std::abs(pre - 6.70) < 1e-9 && std::abs(post - kBounceLiftTarget) <= kBounceLiftTolerance;
  return {pass, "pre " + fmt(pre, 3) + "% post " + fmt(post, 3) + "% target " + fmt(kBounceLiftTarget, 3) + "%"};
}

Event anon(std::string id, std::optional<std::string> cookie, std::optional<std::string> user, std::int64_t t) {
  Event e = click(std::move(id), "", t, "p");
  e.cust_id.reset();
  e.cookie_id = std::move(cookie);
  e.user_id = std::move(user);
  return e;
}

bool identity_paths() {
  auto cust_of = [](const EventLog& log, const std::string& id) -> std::string {
    for (const auto& e : log)
      if (e.event_id == id) return e.cust_id.value_or("");
    return "<dropped>";
  };
  const auto no_ids = resolve(EventLog({anon("a", std::nullopt, std::nullopt, kT0)})).log;
  const auto ambiguous = resolve(EventLog({anon("a", "k", "u1", kT0), anon("b", "k", "u2", kT0 + 1), anon("c", "k", std::nullopt, kT0 + 2)})).log;
  const auto mapped = resolve(EventLog({anon("a", "k", std::nullopt, kT0), anon("b", "k", "u1", kT0 + 1)})).log;
  const auto cookie_only = resolve(EventLog({anon("a", "k", std::nullopt, kT0)})).log;
  return no_ids.size() == 0 && cust_of(ambiguous, "c") == "<dropped>" && cust_of(ambiguous, "a") == "u1" &&
         cust_of(mapped, "a") == "u1" && cust_of(mapped, "b") == "u1" && cust_of(cookie_only, "a") == "k";
}

Outcome identity_algorithm() {
  if (!identity_paths()) return {false, "pseudocode path cases failed"};
  SynthConfig cfg;
  cfg.multi_device_fraction = 0.1;
  const auto synth = generate(cfg);
  const auto r = resolve(synth.log);
  std::size_t matched = 0, mismatched = 0;
  std::set<std::string> kept;
  for (const auto& e : r.log) {
    kept.insert(e.event_id);
    const auto& person = synth.truth.customers.at(synth.truth.event_person.at(e.event_id));
    (e.cust_id && *e.cust_id == person.canonical_id() ? matched : mismatched)++;
  }
  std::set<std::string> eliminated;
  for (const auto& e : synth.log)
    if (!kept.count(e.event_id) && e.cookie_id && !e.user_id) eliminated.insert(e.event_id);
  const bool pass = mismatched == 0 && eliminated == synth.truth.ambiguous_events && !eliminated.empty();
  return {pass, std::to_string(matched) + " matched, " + std::to_string(mismatched) + " mismatched, " +
                    std::to_string(eliminated.size()) + "/" + std::to_string(synth.truth.ambiguous_events.size()) +
                    " ambiguous eliminations"};
}

Outcome b2b_scenario() {
  std::mt19937_64 rng(21);
  std::vector<Event> events;
  std::set<std::string> resellers;
  std::size_t id = 0;
  for (int c = 0; c < 300; ++c) {
    const bool reseller = c % 50 == 7;
    const auto cust = "c" + std::to_string(c);
    if (reseller) resellers.insert(cust);
    for (int d = 0; d < 5; ++d) {
      const int buys = reseller ? 11 + static_cast<int>(rng() % 6) : 1 + static_cast<int>(rng() % 3);
      for (int b = 0; b < buys; ++b)
        events.push_back(buy("e" + std::to_string(id++), cust, kT0 + d * kMillisPerDay + b * 60'000, "p" + std::to_string(b)));
    }
  }
  const EventLog log(events);
  std::vector<double> per_day;
  {
    std::map<std::pair<std::string, std::int64_t>, double> counts;
    for (const auto& e : log) counts[{*e.cust_id, utc_day(e.timestamp_utc)}] += 1;
    for (const auto& [k, v] : counts) per_day.push_back(v);
  }
  const double med = median(per_day);
  const auto flags = detect_b2b(log, {5.0});
  return {med == 2.0 && flags.keys() == resellers,
          "median " + fmt(med, 1) + ", flagged " + std::to_string(flags.size()) + " of " + std::to_string(resellers.size()) +
              " injected"};
}

Outcome attribution_oracle() {
  const AttributionWindows w;
  const PlpGate gate;
  std::size_t pairs = 0, boundary = 0;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    const std::size_t n = 200 + (s * 7919) % 9800;
    const auto log = random_attribution_log(n, s, w);
    const auto fast = attribute(log, w, gate);
    const auto slow = brute_force_attribution(log, w, gate);
    if (fast.pairs.size() != slow.size()) return {false, "count differs on seed " + std::to_string(s)};
    std::map<EventType, std::size_t> by_type;
    for (std::size_t i = 0; i < slow.size(); ++i) {
      const auto& f = fast.pairs[i];
      if (f.interaction_index != slow[i].interaction || f.hit_index != slow[i].hit || f.type != slow[i].type ||
          f.lag_ms != slow[i].lag)
        return {false, "pairing differs on seed " + std::to_string(s)};
      ++by_type[slow[i].type];
      if (slow[i].lag == w.for_type(slow[i].type)) ++boundary;
    }
    for (auto t : {EventType::Click, EventType::Atc, EventType::Buy})
      if (fast.count(t) != by_type[t]) return {false, "type count differs on seed " + std::to_string(s)};
    std::map<CellKey, HitCounts> hits;
    for (const auto& e : log)
      if (e.is_hit() && gate.hit_eligible(e)) {
        auto& h = hits[cell_of(e)];
        ++h.hits;
        if (!e.excluded_from_metrics) ++h.ctr_hits;
      }
    if (hits != fast.eligible_hits) return {false, "hit counts differ on seed " + std::to_string(s)};
    pairs += slow.size();
  }
  return {boundary > 0, "50 logs, " + std::to_string(pairs) + " pairs, " + std::to_string(boundary) + " at the window boundary"};
}

struct Score {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 1.0; }
};

void score(Score& s, const std::set<std::string>& flagged, const std::set<std::string>& truth) {
  for (const auto& c : flagged) (truth.count(c) ? s.tp : s.fp)++;
  for (const auto& c : truth) s.fn += flagged.count(c) ? 0 : 1;
}

Outcome detector_accuracy() {
  double worst = 1.0;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    const auto synth = generate(cfg);
    const auto log = deduplicate(resolve(synth.log).log).log;
    Score bots, bounces;
    score(bots, detect_bots(log).keys(), synth.truth.canonical_ids(CustomerLabel::Bot));
    score(bounces, detect_bounces(log).keys(), synth.truth.canonical_ids(CustomerLabel::Bounce));
    worst = std::min({worst, bots.precision(), bots.recall(), bounces.precision(), bounces.recall()});
  }
  return {worst >= kDetectorFloor, "lowest per-seed precision/recall " + fmt(worst, 3)};
}

Outcome aa_consistency() {
  std::size_t consistent = 0, divergent_flagged = 0;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    for (double ratio : {1.0, 2.0}) {
      auto cfg = SynthConfig::zero_pathology();
      cfg.seed = seed;
      cfg.customers = 4000;
      cfg.days = 7;
      cfg.daily_ctr_variation = 0.3;
      cfg.segment_ctr_ratio = ratio;
      const auto log = ensure_segments(resolve(generate(cfg).log).log, 7);
      const auto v = compare_aa(rates(attribute(log)));
      if (ratio == 1.0) consistent += v.verdict == AAVerdictKind::Consistent;
      else divergent_flagged += v.verdict == AAVerdictKind::Inconsistent;
    }
  }
  return {consistent >= kAAMinConsistent && divergent_flagged == kSeeds,
          "same model " + std::to_string(consistent) + "/20 consistent, 2x divergence " +
              std::to_string(divergent_flagged) + "/20 inconsistent"};
}

Outcome determinism() {
  SynthConfig synth;
  synth.seed = 5;
  const auto log = generate(synth).log;
  const auto cfg = PipelineConfig::from_json(Json::object());
  const auto a = run_pipeline(cfg, log), b = run_pipeline(cfg, log);
  std::ostringstream la, lb;
  write_jsonl(la, a.log);
  write_jsonl(lb, b.log);
  const bool pass = a.report.dump(2) == b.report.dump(2) && a.plots.dump() == b.plots.dump() && la.str() == lb.str();
  return {pass, "report " + std::to_string(a.report.dump(2).size()) + " bytes"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"hampel_reproduction", hampel_reproduction},
      {"bootlier_separation", bootlier_separation},
      {"false_positive_budget", false_positive_budget},
      {"bounce_lift", bounce_lift},
      {"identity_algorithm", identity_algorithm},
      {"b2b_scenario", b2b_scenario},
      {"attribution_oracle", attribution_oracle},
      {"detector_precision_recall", detector_accuracy},
      {"aa_consistency", aa_consistency},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " (" << fmt(dt, 1) << " s)" << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - failed << "/" << criteria.size() << std::endl;
  return failed ? 1 : 0;
}
