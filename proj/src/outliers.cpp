#include "clickprep/outliers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "clickprep/parallel.hpp"

namespace clickprep {

std::string_view to_string(ActivityMetric m) {
  return m == ActivityMetric::ViewsPerDay ? "VIEWS_PER_DAY" : "BUYS_PER_DAY";
}

ActivityMetric parse_activity_metric(std::string_view s) {
  if (s == "views" || s == "VIEWS_PER_DAY") return ActivityMetric::ViewsPerDay;
  if (s == "buys" || s == "BUYS_PER_DAY") return ActivityMetric::BuysPerDay;
  throw Error(ErrorCode::InvalidParams, "unknown activity metric '" + std::string(s) + "'");
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::Unimodal: return "UNIMODAL";
    case Modality::Noisy: return "NOISY";
    case Modality::Multimodal: return "MULTIMODAL";
  }
  return "UNIMODAL";
}

ActivityPopulation build_population(const EventLog& log, ActivityMetric metric) {
  const EventType wanted = metric == ActivityMetric::ViewsPerDay ? EventType::Click : EventType::Buy;
  std::map<CustomerDay, std::int64_t> counts;
  for (const auto& e : log)
    if (e.event_type == wanted) ++counts[CustomerDay{e.customer_key(), utc_day(e.timestamp_utc)}];

  ActivityPopulation pop;
  pop.metric = metric;
  pop.values.reserve(counts.size());
  pop.keys.reserve(counts.size());
  for (auto& [key, n] : counts) {
    pop.keys.push_back(key);
    pop.values.push_back(n);
  }
  return pop;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyPopulation, "median of an empty population");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return (lower + upper) / 2.0;
}

double mad(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyPopulation, "MAD of an empty population");
  const double m = median({values.begin(), values.end()});
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - m));
  return median(std::move(dev));
}

double mad(std::span<const std::int64_t> values) {
  std::vector<double> v(values.begin(), values.end());
  return mad(std::span<const double>(v));
}

double hampel_limit(double median, double mad, double x) { return median + x * kMadToSigma * mad; }

BootlierParams BootlierParams::defaults_for(ActivityMetric metric) {
  BootlierParams p;
  if (metric == ActivityMetric::BuysPerDay) {
    p.trim = 3;
    p.sample_floor = 50;
  }
  return p;
}

std::size_t BootlierParams::sample_size_for(std::size_t population) const {
  if (sample_size > 0) return sample_size;
  auto n = static_cast<std::size_t>(std::ceil(sample_fraction * static_cast<double>(population)));
  return std::max({n, sample_floor, 2 * trim + 2});
}

void BootlierParams::validate(std::size_t population) const {
  const std::size_t n = sample_size_for(population);
  if (n < 2 * trim + 2)
    throw Error(ErrorCode::InvalidParams, "sample size " + std::to_string(n) + " < 2k+2 for k=" + std::to_string(trim));
  if (iterations < 1000) throw Error(ErrorCode::InvalidParams, "at least 1000 bootstrap iterations required");
  if (!(prominence > 0.0 && prominence < 1.0) || !(noise_prominence > 0.0 && noise_prominence <= prominence))
    throw Error(ErrorCode::InvalidParams, "prominence thresholds must satisfy 0 < noise <= multimodal < 1");
  if (bins == 0) throw Error(ErrorCode::InvalidParams, "bins must be positive");
  if (n > population)
    throw Error(ErrorCode::InsufficientPopulation,
                "sample size " + std::to_string(n) + " exceeds population " + std::to_string(population));
}

Json BootlierParams::to_json() const {
  return {{"sample_size", sample_size},
          {"trim", trim},
          {"iterations", iterations},
          {"seed", seed},
          {"prominence", prominence},
          {"noise_prominence", noise_prominence},
          {"sample_fraction", sample_fraction},
          {"sample_floor", sample_floor},
          {"fixed_sample_size", fixed_sample_size},
          {"bins", bins}};
}

BootlierParams BootlierParams::from_json(const Json& j, BootlierParams p) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "bootlier parameters must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "sample_size" || key == "N") p.sample_size = value.get<std::size_t>();
      else if (key == "trim" || key == "k") p.trim = value.get<std::size_t>();
      else if (key == "iterations" || key == "iters") p.iterations = value.get<std::size_t>();
      else if (key == "seed") p.seed = value.get<std::uint64_t>();
      else if (key == "prominence") p.prominence = value.get<double>();
      else if (key == "noise_prominence") p.noise_prominence = value.get<double>();
      else if (key == "sample_fraction") p.sample_fraction = value.get<double>();
      else if (key == "sample_floor") p.sample_floor = value.get<std::size_t>();
      else if (key == "fixed_sample_size") p.fixed_sample_size = value.get<bool>();
      else if (key == "bins") p.bins = value.get<std::size_t>();
      else throw Error(ErrorCode::ConfigInvalid, "unknown bootlier parameter '" + key + "'");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigInvalid, std::string("bootlier parameters: ") + ex.what());
  }
  return p;
}

Json BootlierHistogram::to_json() const {
  Json edges = Json::array();
  for (std::size_t i = 0; i <= counts.size(); ++i) edges.push_back(bin_start + bin_width * static_cast<double>(i));
  return {{"bin_edges", edges},
          {"counts", counts},
          {"density", density},
          {"sample_size", sample_size},
          {"trim", trim},
          {"iterations", iterations},
          {"seed", seed},
          {"population_size", population_size},
          {"value_resolution", value_resolution}};
}

namespace {

constexpr std::size_t kChunk = 4096;

BootlierHistogram bootlier_sorted(std::span<const std::int64_t> sorted, const BootlierParams& params) {
  params.validate(sorted.size());
  const std::size_t n = params.sample_size_for(sorted.size());
  const std::size_t k = params.trim;

  BootlierHistogram h;
  h.sample_size = n;
  h.trim = k;
  h.iterations = params.iterations;
  h.seed = params.seed;
  h.population_size = sorted.size();
  h.statistics.assign(params.iterations, 0.0);

  double resolution = 0.0;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const auto gap = static_cast<double>(sorted[i] - sorted[i - 1]);
    if (gap > 0 && (resolution == 0.0 || gap < resolution)) resolution = gap;
  }
  h.value_resolution = resolution;

  const std::size_t chunks = (params.iterations + kChunk - 1) / kChunk;
  detail::for_each_chunk(chunks, [&](std::size_t chunk) {
    std::mt19937_64 rng(detail::mix_seed(params.seed ^ detail::mix_seed(chunk)));
    std::uniform_int_distribution<std::size_t> pick(0, sorted.size() - 1);
    std::vector<std::size_t> idx(n);
    const std::size_t begin = chunk * kChunk;
    const std::size_t end = std::min(params.iterations, begin + kChunk);
    for (std::size_t it = begin; it < end; ++it) {
      for (auto& i : idx) i = pick(rng);
      // The population is sorted, so sorted indices give sorted sample values.
      std::sort(idx.begin(), idx.end());
      std::int64_t total = 0, middle = 0;
      for (std::size_t j = 0; j < n; ++j) {
        total += sorted[idx[j]];
        if (j >= k && j < n - k) middle += sorted[idx[j]];
      }
      h.statistics[it] = static_cast<double>(total) / static_cast<double>(n) -
                         static_cast<double>(middle) / static_cast<double>(n - 2 * k);
    }
  });

  const auto [lo_it, hi_it] = std::minmax_element(h.statistics.begin(), h.statistics.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi > lo) {
    h.bin_start = lo;
    h.bin_width = (hi - lo) / static_cast<double>(params.bins);
    h.counts.assign(params.bins, 0);
    for (double s : h.statistics) {
      auto b = static_cast<std::size_t>((s - lo) / h.bin_width);
      ++h.counts[std::min(b, params.bins - 1)];
    }
  } else {
    h.bin_start = lo;
    h.bin_width = 0.0;
    h.counts.assign(1, h.statistics.size());
  }
  h.density.reserve(h.counts.size());
  for (auto c : h.counts) {
    const double width = h.bin_width > 0 ? h.bin_width : 1.0;
    h.density.push_back(static_cast<double>(c) / (static_cast<double>(h.statistics.size()) * width));
  }
  return h;
}

}  // namespace

BootlierHistogram bootlier_histogram(std::span<const std::int64_t> values, const BootlierParams& params) {
  std::vector<std::int64_t> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  return bootlier_sorted(sorted, params);
}

BootlierHistogram bootlier_histogram(const ActivityPopulation& pop, const BootlierParams& params) {
  return bootlier_histogram(std::span<const std::int64_t>(pop.values), params);
}

Json ModalityResult::to_json(bool include_curve) const {
  Json peaks_json = Json::array();
  for (const auto& p : peaks)
    peaks_json.push_back({{"location", p.location}, {"density", p.density}, {"prominence", p.prominence}});
  Json j = {{"verdict", to_string(verdict)}, {"peak_count", peak_count}, {"bandwidth", bandwidth}, {"peaks", peaks_json}};
  if (include_curve) {
    j["grid"] = grid;
    j["curve"] = curve;
  }
  return j;
}

namespace {

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double silverman_bandwidth(std::span<const double> sorted) {
  const double sd = sample_sd(sorted);
  const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
  const double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(sorted.size()), -0.2);
}

struct Curve {
  std::vector<double> x;
  std::vector<double> y;
};

// Binned Gaussian KDE: counts on a fine grid convolved with a truncated kernel.
Curve binned_kde(std::span<const double> sorted, double h) {
  const double lo = sorted.front() - 4 * h;
  const double hi = sorted.back() + 4 * h;
  const auto grid_points =
      static_cast<std::size_t>(std::clamp((hi - lo) / (h / 5.0), 512.0, 65536.0));
  const double dx = (hi - lo) / static_cast<double>(grid_points);
  std::vector<double> counts(grid_points, 0.0);
  for (double v : sorted) {
    auto b = static_cast<std::size_t>((v - lo) / dx);
    counts[std::min(b, grid_points - 1)] += 1.0;
  }
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(5.0 * h / dx));
  std::vector<double> kernel(2 * radius + 1);
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * h * std::sqrt(2.0 * M_PI));
  for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
    const double u = static_cast<double>(i) * dx / h;
    kernel[i + radius] = norm * std::exp(-0.5 * u * u);
  }
  Curve c;
  c.x.resize(grid_points);
  c.y.assign(grid_points, 0.0);
  for (std::size_t i = 0; i < grid_points; ++i) c.x[i] = lo + (static_cast<double>(i) + 0.5) * dx;
  const auto g = static_cast<std::ptrdiff_t>(grid_points);
  for (std::ptrdiff_t i = 0; i < g; ++i) {
    if (counts[i] == 0.0) continue;
    const std::ptrdiff_t from = std::max<std::ptrdiff_t>(0, i - radius);
    const std::ptrdiff_t to = std::min<std::ptrdiff_t>(g - 1, i + radius);
    for (std::ptrdiff_t j = from; j <= to; ++j) c.y[j] += counts[i] * kernel[j - i + radius];
  }
  return c;
}

// Local maxima with their topographic prominence; plateaus count once at
// their centre. The curve is treated as zero beyond both ends.
std::vector<DensityPeak> find_peaks(const Curve& c) {
  const auto& y = c.y;
  const std::size_t n = y.size();
  std::vector<DensityPeak> peaks;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && y[j + 1] == y[i]) ++j;
    const double left = i == 0 ? 0.0 : y[i - 1];
    const double right = j + 1 >= n ? 0.0 : y[j + 1];
    if (y[i] > left && y[i] > right) {
      const std::size_t at = (i + j) / 2;
      const double height = y[at];
      double left_min = height;
      std::ptrdiff_t l = static_cast<std::ptrdiff_t>(i) - 1;
      for (; l >= 0 && y[l] <= height; --l) left_min = std::min(left_min, y[l]);
      if (l < 0) left_min = 0.0;
      double right_min = height;
      std::size_t r = j + 1;
      for (; r < n && y[r] <= height; ++r) right_min = std::min(right_min, y[r]);
      if (r >= n) right_min = 0.0;
      peaks.push_back({c.x[at], height, height - std::max(left_min, right_min)});
    }
    i = j + 1;
  }
  return peaks;
}

}  // namespace

ModalityResult modality(const BootlierHistogram& hist, double prominence, double noise_prominence) {
  ModalityResult out;
  if (hist.statistics.empty()) throw Error(ErrorCode::EmptyPopulation, "histogram has no statistics");

  std::vector<double> sorted = hist.statistics;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    out.peaks.push_back({sorted.front(), 1.0, 1.0});
    out.peak_count = 1;
    out.grid = {sorted.front()};
    out.curve = {1.0};
    return out;
  }

  double h = silverman_bandwidth(sorted);
  // The statistic moves in steps of resolution / (N - 2k); a narrower kernel
  // resolves that lattice into spurious modes.
  if (hist.value_resolution > 0 && hist.sample_size > 2 * hist.trim)
    h = std::max(h, hist.value_resolution / static_cast<double>(hist.sample_size - 2 * hist.trim));
  if (!(h > 0)) h = sample_sd(sorted) > 0 ? sample_sd(sorted) * 0.1 : 1e-9;
  out.bandwidth = h;

  Curve curve = binned_kde(sorted, h);
  auto peaks = find_peaks(curve);
  const double top = *std::max_element(curve.y.begin(), curve.y.end());
  std::size_t major = 0, minor = 0;
  for (auto& p : peaks) {
    p.prominence /= top;
    if (p.prominence >= prominence) ++major;
    if (p.prominence >= noise_prominence) {
      ++minor;
      out.peaks.push_back(p);
    }
  }
  out.peak_count = minor;
  out.verdict = major > 1 ? Modality::Multimodal : (minor > 1 ? Modality::Noisy : Modality::Unimodal);

  // Plot export: at most ~512 evenly spaced curve points.
  const std::size_t stride = std::max<std::size_t>(1, curve.x.size() / 512);
  for (std::size_t i = 0; i < curve.x.size(); i += stride) {
    out.grid.push_back(curve.x[i]);
    out.curve.push_back(curve.y[i]);
  }
  return out;
}

Json OutlierDecision::to_json() const {
  Json trace = Json::array();
  for (const auto& s : removal_trace)
    trace.push_back({{"candidate_limit", s.candidate_limit},
                     {"verdict", to_string(s.verdict)},
                     {"peak_count", s.peak_count},
                     {"sample_size", s.sample_size},
                     {"population_size", s.population_size}});
  return {{"metric", to_string(metric)},
          {"final_limit", final_limit},
          {"removal_trace", trace},
          {"customers_flagged", customers_flagged},
          {"flagged_fraction", flagged_fraction},
          {"manual", manual}};
}

OutlierDecision OutlierDecision::from_json(const Json& j) {
  OutlierDecision d;
  try {
    d.metric = parse_activity_metric(j.at("metric").get<std::string>());
    d.final_limit = j.at("final_limit").get<std::int64_t>();
    d.manual = j.value("manual", false);
    d.flagged_fraction = j.value("flagged_fraction", 0.0);
    if (j.contains("customers_flagged"))
      d.customers_flagged = j.at("customers_flagged").get<std::set<std::string>>();
    if (j.contains("removal_trace")) {
      for (const auto& s : j.at("removal_trace")) {
        TraceStep step;
        step.candidate_limit = s.at("candidate_limit").get<std::int64_t>();
        const auto v = s.at("verdict").get<std::string>();
        step.verdict = v == "MULTIMODAL" ? Modality::Multimodal : (v == "NOISY" ? Modality::Noisy : Modality::Unimodal);
        step.peak_count = s.value("peak_count", std::size_t{0});
        step.sample_size = s.value("sample_size", std::size_t{0});
        step.population_size = s.value("population_size", std::size_t{0});
        d.removal_trace.push_back(step);
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigInvalid, std::string("outlier decision: ") + ex.what());
  }
  return d;
}

namespace {

void fill_flags(OutlierDecision& d, const ActivityPopulation& pop) {
  std::set<std::string> customers;
  for (std::size_t i = 0; i < pop.keys.size(); ++i) {
    customers.insert(pop.keys[i].cust_id);
    if (pop.values[i] > d.final_limit) d.customers_flagged.insert(pop.keys[i].cust_id);
  }
  d.flagged_fraction =
      customers.empty() ? 0.0 : static_cast<double>(d.customers_flagged.size()) / static_cast<double>(customers.size());
}

}  // namespace

OutlierDecision find_outlier_limit(const ActivityPopulation& pop, const BootlierParams& params) {
  if (pop.values.empty()) throw Error(ErrorCode::EmptyPopulation, "no activity to analyse");
  std::vector<std::int64_t> sorted = pop.values;
  std::sort(sorted.begin(), sorted.end());
  const double med = median(std::vector<double>(sorted.begin(), sorted.end()));

  BootlierParams step_params = params;
  if (params.fixed_sample_size && params.sample_size == 0) step_params.sample_size = params.sample_size_for(sorted.size());

  OutlierDecision d;
  d.metric = pop.metric;
  std::size_t end = sorted.size();
  while (end > 0) {
    const std::int64_t candidate = sorted[end - 1];
    if (static_cast<double>(candidate) < med) break;
    const std::size_t n = step_params.sample_size_for(end);
    if (end < std::max(n, 2 * params.trim + 2)) {
      if (d.removal_trace.empty())
        throw Error(ErrorCode::InsufficientPopulation, std::string(to_string(pop.metric)) + ": population of " +
                                                           std::to_string(end) + " is below the sample size " +
                                                           std::to_string(std::max(n, 2 * params.trim + 2)));
      break;
    }

    auto hist = bootlier_sorted(std::span<const std::int64_t>(sorted.data(), end), step_params);
    auto mod = modality(hist, params.prominence, params.noise_prominence);
    d.removal_trace.push_back({candidate, mod.verdict, mod.peak_count, hist.sample_size, end});
    if (mod.verdict == Modality::Unimodal) {
      d.final_limit = candidate;
      fill_flags(d, pop);
      return d;
    }
    end = static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.begin() + end, candidate) - sorted.begin());
  }
  throw Error(ErrorCode::NoUnimodalLimit, std::string(to_string(pop.metric)) + ": no unimodal limit above the median after " +
                                              std::to_string(d.removal_trace.size()) + " steps");
}

OutlierDecision manual_decision(const ActivityPopulation& pop, std::int64_t limit) {
  OutlierDecision d;
  d.metric = pop.metric;
  d.final_limit = limit;
  d.manual = true;
  std::size_t at_or_below = 0;
  for (auto v : pop.values)
    if (v <= limit) ++at_or_below;
  d.removal_trace.push_back({limit, Modality::Unimodal, 0, 0, at_or_below});
  fill_flags(d, pop);
  return d;
}

OutlierFilterResult apply_outlier_filter(const EventLog& log, std::span<const OutlierDecision> decisions) {
  std::set<std::string> all_customers;
  for (const auto& e : log) all_customers.insert(e.customer_key());

  std::vector<bool> removed(log.size(), false);
  CleaningReport report;
  std::set<std::string> flagged_union;
  for (const auto& d : decisions) {
    const auto pop = build_population(log, d.metric);
    std::set<CustomerDay> over;
    std::set<std::string> flagged;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      if (pop.values[i] > d.final_limit) {
        over.insert(pop.keys[i]);
        flagged.insert(pop.keys[i].cust_id);
      }
    }
    RuleOutcome outcome;
    outcome.rule = std::string("outliers_") + (d.metric == ActivityMetric::ViewsPerDay ? "views" : "buys");
    outcome.parameters = {{"limit", d.final_limit}, {"manual", d.manual}};
    for (std::size_t i = 0; i < log.size(); ++i) {
      if (removed[i]) continue;
      const auto& e = log[i];
      if (over.count(CustomerDay{e.customer_key(), utc_day(e.timestamp_utc)})) {
        removed[i] = true;
        ++outcome.records_removed;
        if (e.is_hit()) ++outcome.hits_removed;
      }
    }
    outcome.customers_flagged = flagged.size();
    outcome.details = {{"customer_days_flagged", over.size()},
                       {"flagged_fraction",
                        all_customers.empty() ? 0.0 : static_cast<double>(flagged.size()) / all_customers.size()}};
    flagged_union.insert(flagged.begin(), flagged.end());
    report.rules.push_back(std::move(outcome));
  }

  std::vector<Event> kept;
  kept.reserve(log.size());
  for (std::size_t i = 0; i < log.size(); ++i)
    if (!removed[i]) kept.push_back(log[i]);
  if (!report.rules.empty())
    report.rules.back().details["flagged_fraction_all_metrics"] =
        all_customers.empty() ? 0.0 : static_cast<double>(flagged_union.size()) / all_customers.size();
  return {log.with_events(std::move(kept)), std::move(report)};
}

Json NormalityProbe::to_json() const {
  Json d = Json::array(), q = Json::array();
  for (auto [x, y] : density) d.push_back({x, y});
  for (auto [x, y] : qq) q.push_back({x, y});
  return {{"density", d}, {"qq", q}, {"qq_correlation", qq_correlation}, {"verdict", normal ? "NORMAL" : "NON_NORMAL"}};
}

NormalityProbe normality_probe(std::span<const double> values) {
  if (values.size() < 20) throw Error(ErrorCode::InsufficientPopulation, "normality probe needs at least 20 values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  const double sd = sample_sd(sorted);

  NormalityProbe probe;
  if (!(sd > 0)) {
    probe.density = {{sorted.front(), 1.0}};
    probe.qq_correlation = 0.0;
    probe.normal = false;
    return probe;
  }

  // Blom plotting positions against a normal fitted by moments.
  boost::math::normal_distribution<double> standard(0.0, 1.0);
  std::vector<double> theory(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    theory[i] = boost::math::quantile(standard, (static_cast<double>(i) + 1.0 - 0.375) / (n + 0.25));

  const double tmean = std::accumulate(theory.begin(), theory.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    sxy += (theory[i] - tmean) * (sorted[i] - mean);
    sxx += (theory[i] - tmean) * (theory[i] - tmean);
    syy += (sorted[i] - mean) * (sorted[i] - mean);
  }
  probe.qq_correlation = sxy / std::sqrt(sxx * syy);
  probe.normal = probe.qq_correlation >= 0.95;

  const std::size_t stride = std::max<std::size_t>(1, sorted.size() / 1000);
  for (std::size_t i = 0; i < sorted.size(); i += stride) probe.qq.emplace_back(mean + sd * theory[i], sorted[i]);

  double h = silverman_bandwidth(sorted);
  if (!(h > 0)) h = sd * 0.1;
  const Curve curve = binned_kde(sorted, h);
  const std::size_t cstride = std::max<std::size_t>(1, curve.x.size() / 256);
  for (std::size_t i = 0; i < curve.x.size(); i += cstride) probe.density.emplace_back(curve.x[i], curve.y[i]);
  return probe;
}

NormalityProbe normality_probe(const ActivityPopulation& pop) {
  std::vector<double> v(pop.values.begin(), pop.values.end());
  return normality_probe(v);
}

}  // namespace clickprep
