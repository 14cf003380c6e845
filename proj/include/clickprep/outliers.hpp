#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "clickprep/event.hpp"

namespace clickprep {

enum class ActivityMetric { ViewsPerDay, BuysPerDay };

std::string_view to_string(ActivityMetric m);
/// Accepts "views"/"buys" as well as the enum spellings.
ActivityMetric parse_activity_metric(std::string_view s);

struct CustomerDay {
  std::string cust_id;
  std::int64_t day = 0;

  auto operator<=>(const CustomerDay&) const = default;
};

/// One positive count per (customer, day). Views are CLICK events, buys are
/// BUY events. `keys` is parallel to `values` and empty for bare value lists.
struct ActivityPopulation {
  ActivityMetric metric = ActivityMetric::ViewsPerDay;
  std::vector<std::int64_t> values;
  std::vector<CustomerDay> keys;

  std::size_t size() const noexcept { return values.size(); }
};

ActivityPopulation build_population(const EventLog& log, ActivityMetric metric);

constexpr double kMadToSigma = 1.4826;

/// Throws Error(EmptyPopulation).
double median(std::vector<double> values);
double mad(std::span<const double> values);
double mad(std::span<const std::int64_t> values);

/// median + x * 1.4826 * mad. Counts strictly above it are outliers.
double hampel_limit(double median, double mad, double x = 2.0);

struct BootlierParams {
  std::size_t sample_size = 0;  // N; 0 derives it from the population
  std::size_t trim = 7;         // k, removed from each tail
  std::size_t iterations = 50'000;
  std::uint64_t seed = 42;
  double prominence = 0.05;
  double noise_prominence = 0.01;
  double sample_fraction = 0.01;
  std::size_t sample_floor = 0;
  // Keep the N derived from the initial population for every trimming step
  // instead of recomputing it.
  bool fixed_sample_size = false;
  std::size_t bins = 200;

  /// k=7 for views, k=3 and an N floor of 50 for buys.
  static BootlierParams defaults_for(ActivityMetric metric);

  /// ceil(sample_fraction * population), at least sample_floor and 2k+2;
  /// an explicit sample_size wins.
  std::size_t sample_size_for(std::size_t population) const;
  /// Throws Error(InvalidParams) or Error(InsufficientPopulation).
  void validate(std::size_t population) const;
  Json to_json() const;
  /// Overrides fields of `base` present in `j`; also accepts the short keys
  /// N, k and iters. Throws Error(ConfigInvalid) on unknown keys.
  static BootlierParams from_json(const Json& j, BootlierParams base);
};

struct BootlierHistogram {
  std::vector<double> statistics;  // mean - trimmed mean, one per iteration
  double bin_start = 0.0;
  double bin_width = 0.0;
  std::vector<std::size_t> counts;
  std::vector<double> density;
  std::size_t sample_size = 0;
  std::size_t trim = 0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::size_t population_size = 0;
  // Smallest gap between distinct population values; sets the lattice step of
  // the statistic.
  double value_resolution = 0.0;

  Json to_json() const;
};

/// Resamples `values` with replacement `iterations` times and records
/// mean(sample) - trimmed_mean(sample, k) for each draw. Deterministic in the
/// seed regardless of thread count.
BootlierHistogram bootlier_histogram(std::span<const std::int64_t> values, const BootlierParams& params);
BootlierHistogram bootlier_histogram(const ActivityPopulation& pop, const BootlierParams& params);

enum class Modality { Unimodal, Noisy, Multimodal };
std::string_view to_string(Modality m);

struct DensityPeak {
  double location = 0.0;
  double density = 0.0;
  double prominence = 0.0;  // relative to the highest density
};

struct ModalityResult {
  Modality verdict = Modality::Unimodal;
  std::size_t peak_count = 1;  // peaks at the noise prominence
  std::vector<DensityPeak> peaks;
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> curve;

  Json to_json(bool include_curve = true) const;
};

/// Gaussian KDE with Silverman's bandwidth (floored at the statistic's
/// lattice step), then peak counting by topographic prominence.
ModalityResult modality(const BootlierHistogram& hist, double prominence = 0.05, double noise_prominence = 0.01);

struct TraceStep {
  std::int64_t candidate_limit = 0;
  Modality verdict = Modality::Unimodal;
  std::size_t peak_count = 0;
  std::size_t sample_size = 0;
  std::size_t population_size = 0;
};

struct OutlierDecision {
  ActivityMetric metric = ActivityMetric::ViewsPerDay;
  std::int64_t final_limit = 0;
  std::vector<TraceStep> removal_trace;
  std::set<std::string> customers_flagged;
  double flagged_fraction = 0.0;
  bool manual = false;

  Json to_json() const;
  static OutlierDecision from_json(const Json& j);
};

/// Walks candidate limits down through the distinct observed values and
/// returns the first (largest) whose Bootlier plot is unimodal. Throws
/// Error(NoUnimodalLimit) when the population runs out or the candidate falls
/// below the median.
OutlierDecision find_outlier_limit(const ActivityPopulation& pop, const BootlierParams& params);

/// A decision pinned by an analyst; the trace holds the single chosen limit.
OutlierDecision manual_decision(const ActivityPopulation& pop, std::int64_t limit);

struct OutlierFilterResult {
  EventLog log;
  CleaningReport report;
};

/// Removes every event of a customer on any day where that customer's count
/// for a decision's metric is strictly above the decision's limit.
OutlierFilterResult apply_outlier_filter(const EventLog& log, std::span<const OutlierDecision> decisions);

struct NormalityProbe {
  std::vector<std::pair<double, double>> density;  // (x, density)
  std::vector<std::pair<double, double>> qq;       // (theoretical, sample)
  double qq_correlation = 0.0;
  bool normal = false;

  Json to_json() const;
};

/// Density curve and normal Q-Q data against a fitted normal; NON_NORMAL
/// below a Q-Q correlation of 0.95 or for constant data. Needs >= 20 values.
NormalityProbe normality_probe(std::span<const double> values);
NormalityProbe normality_probe(const ActivityPopulation& pop);

}  // namespace clickprep
