#include "clickprep/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "clickprep/identity.hpp"

namespace clickprep {

namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableStream, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::UnreadableStream, "cannot write " + path);
  out << text;
}

EventLog read_log_file(const std::string& path, InputFormat format, const ValidateOptions& options,
                       std::vector<RejectedRow>* rejects) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::UnreadableStream, "cannot open " + path);
  auto parsed = parse_events(in, format, options, fs::path(path).filename().string());
  if (rejects) {
    *rejects = std::move(parsed.rejects);
  } else if (!parsed.rejects.empty()) {
    const auto& r = parsed.rejects.front();
    throw Error(ErrorCode::MalformedRecord, path + ":" + std::to_string(r.line) + ": " + std::string(to_string(r.code)) +
                                                ": " + r.message);
  }
  return std::move(parsed.log);
}

bool PipelineConfig::enabled(const std::string& stage) const {
  auto it = stages.find(stage);
  return it == stages.end() || it->second;
}

Json PipelineConfig::default_json() {
  const NewCustomerConfig nc;
  const DedupPolicy dd;
  const JourneyPolicy jp;
  const AAThresholds aa;
  Json stages = Json::object();
  for (const auto& s : pipeline_stages()) stages[s] = true;
  return {
      {"seed", 7},
      {"stages", stages},
      {"input", {{"path", ""}, {"format", "jsonl"}, {"default_offset_minutes", nullptr}}},
      {"output", {{"log", ""}, {"report", ""}, {"plots", ""}}},
      {"ingest", {{"rates_file", ""}, {"rates", nullptr}, {"base_currency", ""}}},
      {"dedup", {{"session_gap_ms", dd.session_gap_ms}, {"glitch_window_ms", dd.glitch_window_ms}}},
      {"clean",
       {{"rules", {"b2b", "bounce", "bots", "newcust"}},
        {"b2b", {{"m", B2BConfig{}.m}}},
        {"bots_file", ""},
        {"bots", BotConfig{}.to_json()},
        {"newcust", nc.to_json()}}},
      {"journey",
       {{"quick_buy", jp.quick_buy_enabled},
        {"violation_rate_alarm", jp.violation_rate_alarm},
        {"combos_file", ""},
        {"halt_on_alarm", true}}},
      {"outliers",
       {{"metrics", {"views", "buys"}},
        {"views", BootlierParams::defaults_for(ActivityMetric::ViewsPerDay).to_json()},
        {"buys", BootlierParams::defaults_for(ActivityMetric::BuysPerDay).to_json()},
        {"limits", {{"views", nullptr}, {"buys", nullptr}}}}},
      {"metrics",
       {{"windows", AttributionWindows{}.to_json()}, {"plp", PlpGate{}.to_json()}, {"low_visibility_fraction", 0.25}}},
      {"aa", {{"diff_max", aa.diff_max}, {"corr_min", aa.corr_min}, {"min_days", aa.min_days}, {"days", 0}}},
  };
}

namespace {

void overlay(Json& dst, const Json& src, const std::string& path) {
  if (!src.is_object()) throw Error(ErrorCode::ConfigInvalid, "config section '" + path + "' must be an object");
  for (const auto& [key, value] : src.items()) {
    const std::string here = path.empty() ? key : path + "." + key;
    if (!dst.contains(key)) throw Error(ErrorCode::ConfigInvalid, "unknown config key '" + here + "'");
    Json& slot = dst[key];
    if (slot.is_object() && value.is_object() && here != "ingest.rates")
      overlay(slot, value, here);
    else
      slot = value;
  }
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base_dir) / path).lexically_normal().string();
}

}  // namespace

void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorCode::ConfigInvalid, "override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  const Json defaults = PipelineConfig::default_json();
  const Json* schema = &defaults;
  Json* node = &doc;
  std::stringstream parts(key);
  std::string part, walked;
  std::vector<std::string> path;
  while (std::getline(parts, part, '.')) path.push_back(part);
  for (std::size_t i = 0; i < path.size(); ++i) {
    walked += (walked.empty() ? "" : ".") + path[i];
    const bool free_form = schema == nullptr;
    if (!free_form && (!schema->is_object() || !schema->contains(path[i])))
      throw Error(ErrorCode::ConfigInvalid, "unknown config key '" + walked + "'");
    schema = free_form ? nullptr : &(*schema)[path[i]];
    if (schema && schema->is_null() && i + 1 < path.size()) schema = nullptr;  // e.g. ingest.rates.EUR
    if (!node->is_object()) *node = Json::object();
    node = &(*node)[path[i]];
  }
  *node = std::move(value);
}

PipelineConfig PipelineConfig::from_json(const Json& j, const std::string& base_dir) {
  Json doc = default_json();
  overlay(doc, j, "");
  PipelineConfig c;
  c.source = doc;
  try {
    c.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& [stage, on] : doc.at("stages").items()) c.stages[stage] = on.get<bool>();

    const Json& in = doc.at("input");
    c.input_path = resolve_path(in.at("path").get<std::string>(), base_dir);
    c.input_format = parse_input_format(in.at("format").get<std::string>());
    if (!in.at("default_offset_minutes").is_null())
      c.validate.default_offset_minutes = in.at("default_offset_minutes").get<int>();
    const Json& out = doc.at("output");
    c.output_log = resolve_path(out.at("log").get<std::string>(), base_dir);
    c.output_report = resolve_path(out.at("report").get<std::string>(), base_dir);
    c.output_plots = resolve_path(out.at("plots").get<std::string>(), base_dir);

    const Json& ing = doc.at("ingest");
    const std::string base = ing.at("base_currency").get<std::string>();
    std::optional<std::string> base_override;
    if (!base.empty()) base_override = base;
    if (!ing.at("rates").is_null()) {
      c.rates = RateTable::from_json(ing.at("rates"), base_override);
    } else if (const auto file = ing.at("rates_file").get<std::string>(); !file.empty()) {
      c.rates = RateTable::from_json(Json::parse(read_text_file(resolve_path(file, base_dir))), base_override);
    }

    c.dedup.session_gap_ms = doc.at("dedup").at("session_gap_ms").get<std::int64_t>();
    c.dedup.glitch_window_ms = doc.at("dedup").at("glitch_window_ms").get<std::int64_t>();
    c.dedup.validate();

    const Json& cl = doc.at("clean");
    c.rules = cl.at("rules").get<std::vector<std::string>>();
    for (const auto& r : c.rules)
      if (r != "b2b" && r != "bounce" && r != "bots" && r != "newcust")
        throw Error(ErrorCode::ConfigInvalid, "unknown cleaning rule '" + r + "'");
    c.b2b.m = cl.at("b2b").at("m").get<double>();
    c.b2b.validate();
    Json bots = cl.at("bots");
    if (const auto file = cl.at("bots_file").get<std::string>(); !file.empty())
      bots.update(Json::parse(read_text_file(resolve_path(file, base_dir))));
    c.bots = BotConfig::from_json(bots);
    const Json& nc = cl.at("newcust");
    c.newcust.ratio = nc.at("ratio").get<double>();
    c.newcust.x_max = nc.at("x_max").get<std::size_t>();
    c.newcust.min_customers = nc.at("min_customers").get<std::size_t>();

    const Json& jr = doc.at("journey");
    c.journey.quick_buy_enabled = jr.at("quick_buy").get<bool>();
    c.journey.violation_rate_alarm = jr.at("violation_rate_alarm").get<double>();
    c.journey.validate();
    c.halt_on_alarm = jr.at("halt_on_alarm").get<bool>();
    if (const auto file = jr.at("combos_file").get<std::string>(); !file.empty()) {
      std::istringstream combos(read_text_file(resolve_path(file, base_dir)));
      c.combos = ComboMap::read_csv(combos);
    }

    const Json& ol = doc.at("outliers");
    c.outlier_metrics.clear();
    for (const auto& m : ol.at("metrics")) c.outlier_metrics.push_back(parse_activity_metric(m.get<std::string>()));
    c.views_params = BootlierParams::from_json(ol.at("views"), BootlierParams::defaults_for(ActivityMetric::ViewsPerDay));
    c.buys_params = BootlierParams::from_json(ol.at("buys"), BootlierParams::defaults_for(ActivityMetric::BuysPerDay));
    for (const auto& [name, limit] : ol.at("limits").items())
      if (!limit.is_null()) c.manual_limits[parse_activity_metric(name)] = limit.get<std::int64_t>();

    const Json& mt = doc.at("metrics");
    c.windows.click_ms = mt.at("windows").at("click_ms").get<std::int64_t>();
    c.windows.atc_ms = mt.at("windows").at("atc_ms").get<std::int64_t>();
    c.windows.buy_ms = mt.at("windows").at("buy_ms").get<std::int64_t>();
    c.windows.validate();
    c.gate.enabled = mt.at("plp").at("enabled").get<bool>();
    c.gate.top_n = mt.at("plp").at("top_n").get<std::size_t>();
    c.gate.first_page_only = mt.at("plp").at("first_page_only").get<bool>();
    c.gate.validate();
    c.low_visibility_fraction = mt.at("low_visibility_fraction").get<double>();
    c.newcust.windows = c.windows;
    c.newcust.gate = c.gate;
    c.newcust.validate();

    const Json& aa = doc.at("aa");
    c.aa.diff_max = aa.at("diff_max").get<double>();
    c.aa.corr_min = aa.at("corr_min").get<double>();
    c.aa.min_days = aa.at("min_days").get<std::size_t>();
    c.aa.validate();
    c.aa_days = aa.at("days").get<std::size_t>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ConfigInvalid, std::string("pipeline config: ") + ex.what());
  } catch (const Error& ex) {
    if (ex.code() == ErrorCode::ConfigInvalid) throw;
    throw Error(ErrorCode::ConfigInvalid, ex.what());
  }
  return c;
}

namespace {

Json flag_summary(const FlagSet& f) {
  std::map<std::string, std::size_t> reasons;
  for (const auto& [cust, ev] : f.customers)
    for (const auto& e : ev) ++reasons[e.reason];
  return {{"rule", f.rule}, {"flagged", f.size()}, {"reasons", reasons}, {"parameters", f.parameters}};
}

std::vector<std::int64_t> at_or_below(const ActivityPopulation& pop, std::int64_t limit) {
  std::vector<std::int64_t> v;
  for (auto x : pop.values)
    if (x <= limit) v.push_back(x);
  return v;
}

Json plot_histogram(std::span<const std::int64_t> values, const BootlierParams& p, std::int64_t limit) {
  try {
    const auto hist = bootlier_histogram(values, p);
    const auto mod = modality(hist, p.prominence, p.noise_prominence);
    Json j = hist.to_json();
    j["limit"] = limit;
    j["modality"] = mod.to_json();
    return j;
  } catch (const Error& ex) {
    return {{"limit", limit}, {"error", to_string(ex.code())}, {"message", ex.what()}};
  }
}

class Runner {
 public:
  Runner(const PipelineConfig& cfg, EventLog log, std::vector<RejectedRow> rejects)
      : cfg_(cfg), log_(std::move(log)), rejects_(std::move(rejects)) {}

  PipelineResult run() {
    const std::size_t events_in = log_.size() + rejects_.size();
    for (const auto& stage : pipeline_stages()) {
      Json section = {{"stage", stage}};
      if (stopped_) {
        section["status"] = "skipped";
      } else if (!cfg_.enabled(stage)) {
        section["status"] = "disabled";
      } else {
        try {
          section["status"] = "ok";
          run_stage(stage, section);
        } catch (const Error& ex) {
          section["status"] = "error";
          section["error"] = {{"code", to_string(ErrorCode::StageFailure)},
                              {"stage", stage},
                              {"cause", to_string(ex.code())},
                              {"message", ex.what()}};
          exit_ = kExitError;
          stopped_ = true;
        } catch (const std::exception& ex) {
          section["status"] = "error";
          section["error"] = {{"code", to_string(ErrorCode::StageFailure)}, {"stage", stage}, {"message", ex.what()}};
          exit_ = kExitError;
          stopped_ = true;
        }
      }
      stages_.push_back(std::move(section));
    }

    PipelineResult r;
    r.exit_code = exit_;
    r.report = {{"schema_version", 1},
                {"status", exit_ == kExitOk ? "ok" : (exit_ == kExitHalted ? "halted" : "error")},
                {"exit_code", exit_},
                {"config", cfg_.source},
                {"events_in", events_in},
                {"events_out", log_.size()},
                {"stages", stages_},
                {"cleaning", cleaning_.to_json()},
                {"cleaning_removed", cleaning_.total_removed()},
                {"metrics", metrics_}};
    r.plots = plots_;
    r.log = std::move(log_);
    return r;
  }

 private:
  void run_stage(const std::string& stage, Json& s) {
    if (stage == "ingest") ingest(s);
    else if (stage == "identity") identity(s);
    else if (stage == "dedup") dedup(s);
    else if (stage == "clean") clean(s);
    else if (stage == "journey") journey(s);
    else if (stage == "outliers") outliers(s);
    else if (stage == "metrics") metrics(s);
    else if (stage == "aa") aa(s);
  }

  void ingest(Json& s) {
    std::map<std::string, std::size_t> by_code;
    for (const auto& r : rejects_) ++by_code[std::string(to_string(r.code))];
    s["accepted"] = log_.size();
    s["rejected"] = rejects_.size();
    s["rejects_by_code"] = by_code;
    Json rows = Json::array();
    for (const auto& r : rejects_) rows.push_back({{"line", r.line}, {"error", to_string(r.code)}, {"message", r.message}});
    s["rejects"] = std::move(rows);
    RuleOutcome outcome;
    outcome.rule = "ingest_rejects";
    outcome.records_removed = rejects_.size();
    outcome.details = {{"by_code", by_code}};
    cleaning_.rules.push_back(outcome);
    if (cfg_.rates) {
      log_ = normalize_currency(log_, *cfg_.rates);
      s["base_currency"] = cfg_.rates->base();
    } else {
      s["base_currency"] = nullptr;
    }
  }

  void identity(Json& s) {
    auto r = resolve(log_);
    s["report"] = r.report.to_json();
    RuleOutcome outcome;
    outcome.rule = "identity";
    outcome.records_removed = r.report.eliminated_no_ids + r.report.eliminated_ambiguous;
    outcome.details = r.report.to_json();
    cleaning_.rules.push_back(outcome);
    log_ = std::move(r.log);
  }

  void dedup(Json& s) {
    auto r = deduplicate(log_, cfg_.dedup);
    s["report"] = r.report.to_json();
    cleaning_.append(r.report);
    log_ = std::move(r.log);
  }

  void clean(Json& s) {
    auto wants = [&](const char* rule) {
      return std::find(cfg_.rules.begin(), cfg_.rules.end(), rule) != cfg_.rules.end();
    };
    // The three customer detectors are independent reads of the same log.
    std::future<FlagSet> b2b, bounce, bots;
    if (wants("b2b")) b2b = std::async(std::launch::async, [&] { return detect_b2b(log_, cfg_.b2b); });
    if (wants("bounce")) bounce = std::async(std::launch::async, [&] { return detect_bounces(log_); });
    if (wants("bots")) bots = std::async(std::launch::async, [&] { return detect_bots(log_, cfg_.bots); });
    std::map<std::string, FlagSet> found;
    if (b2b.valid()) found["b2b"] = b2b.get();
    if (bounce.valid()) found["bounce"] = bounce.get();
    if (bots.valid()) found["bots"] = bots.get();

    std::vector<FlagSet> ordered;
    Json flags = Json::array();
    for (const auto& rule : cfg_.rules) {
      if (rule == "newcust") continue;
      ordered.push_back(found.at(rule));
      flags.push_back(flag_summary(ordered.back()));
    }
    auto removed = apply_flags(log_, ordered);
    cleaning_.append(removed.report);
    s["report"] = removed.report.to_json();
    log_ = std::move(removed.log);

    // The new-customer cutoff is read off CTR, so it runs once bots and
    // bounces no longer distort it.
    if (wants("newcust")) {
      const auto cutoff = new_customer_cutoff(log_, cfg_.newcust);
      s["newcust"] = cutoff.to_json();
      const auto nf = new_customer_flags(log_, cutoff.x);
      flags.push_back(flag_summary(nf));
      auto marked = apply_flags(log_, {nf}, ApplyPolicy{cutoff.x});
      cleaning_.append(marked.report);
      s["report"].push_back(marked.report.to_json().front());
      log_ = std::move(marked.log);
    }
    s["flags"] = flags;
  }

  void journey(Json& s) {
    if (!cfg_.combos.empty()) {
      auto r = expand_combos(log_, cfg_.combos, cfg_.dedup.session_gap_ms);
      s["combos"] = r.report.to_json();
      cleaning_.append(r.report);
      log_ = std::move(r.log);
    }
    const auto audit = audit_journeys(log_, cfg_.journey);
    s["audit"] = audit.to_json();
    if (audit.verdict == JourneyVerdict::IntegrationAlarm) {
      if (cfg_.halt_on_alarm) {
        s["status"] = "halted";
        exit_ = kExitHalted;
        stopped_ = true;
      }
      return;
    }
    auto r = remove_violators(log_, audit);
    cleaning_.append(r.report);
    log_ = std::move(r.log);
  }

  void outliers(Json& s) {
    std::vector<OutlierDecision> decisions;
    Json metrics = Json::array();
    for (const auto metric : cfg_.outlier_metrics) {
      const auto pop = build_population(log_, metric);
      const BootlierParams& params = metric == ActivityMetric::ViewsPerDay ? cfg_.views_params : cfg_.buys_params;
      Json m = {{"metric", to_string(metric)}, {"population_size", pop.size()}};
      if (!pop.values.empty()) {
        const double med = median({pop.values.begin(), pop.values.end()});
        const double spread = mad(std::span<const std::int64_t>(pop.values));
        m["median"] = med;
        m["mad"] = spread;
        m["hampel_limit"] = hampel_limit(med, spread);
      }
      if (pop.size() >= 20) {
        const auto probe = normality_probe(pop);
        m["normality"] = {{"qq_correlation", probe.qq_correlation}, {"verdict", probe.normal ? "NORMAL" : "NON_NORMAL"}};
        plots_["normality"][std::string(to_string(metric))] = probe.to_json();
      }
      auto manual = cfg_.manual_limits.find(metric);
      OutlierDecision d;
      if (manual != cfg_.manual_limits.end()) {
        d = manual_decision(pop, manual->second);
      } else {
        try {
          d = find_outlier_limit(pop, params);
        } catch (const Error& ex) {
          if (ex.code() != ErrorCode::InsufficientPopulation && ex.code() != ErrorCode::EmptyPopulation) throw;
          // Too little data to judge: no limit for this metric.
          m["skipped"] = {{"code", to_string(ex.code())}, {"message", ex.what()}};
          m["parameters"] = params.to_json();
          metrics.push_back(std::move(m));
          continue;
        }
      }
      m["decision"] = d.to_json();
      m["parameters"] = params.to_json();

      Json hist = Json::object();
      if (!pop.values.empty()) {
        const auto top = *std::max_element(pop.values.begin(), pop.values.end());
        hist["before"] = plot_histogram(pop.values, params, top);
        const auto kept = at_or_below(pop, d.final_limit);
        hist["after"] = plot_histogram(kept, params, d.final_limit);
      }
      plots_["bootlier"][std::string(to_string(metric))] = std::move(hist);
      metrics.push_back(std::move(m));
      decisions.push_back(std::move(d));
    }
    auto r = apply_outlier_filter(log_, decisions);
    cleaning_.append(r.report);
    s["metrics"] = metrics;
    s["report"] = r.report.to_json();
    log_ = std::move(r.log);
  }

  void metrics(Json& s) {
    if (cfg_.enabled("aa")) log_ = ensure_segments(log_, cfg_.seed);
    const auto attr = attribute(log_, cfg_.windows, cfg_.gate);
    report_ = rates(attr);
    try {
      report_.low_visibility = flag_low_visibility(report_, cfg_.low_visibility_fraction);
    } catch (const Error& ex) {
      if (ex.code() != ErrorCode::InsufficientCells) throw;
      s["low_visibility_note"] = ex.what();
    }
    metrics_ = report_.to_json();
    metrics_["attribution"] = {{"windows", attr.windows.to_json()}, {"plp_gate", attr.gate.to_json()},
                               {"excluded", attr.excluded}};
    try {
      metrics_["conversion_revenue"] = conversion_revenue(attr, log_);
      metrics_["base_currency"] = log_.metadata().base_currency;
    } catch (const Error& ex) {
      if (ex.code() != ErrorCode::MissingPrice) throw;
      metrics_["conversion_revenue"] = nullptr;
      metrics_["conversion_revenue_note"] = ex.what();
    }
    try {
      metrics_["btr_buyer"] = btr_buyer(log_);
    } catch (const Error& ex) {
      if (ex.code() != ErrorCode::NoHits) throw;
      metrics_["btr_buyer"] = nullptr;
    }
    s["totals"] = report_.totals.to_json();
    s["cells"] = report_.cells.size();

    Json series = Json::object();
    for (const std::string seg : {"", "A1", "A2"}) {
      Json points = Json::array();
      for (const auto& [day, ctr] : report_.daily_ctr(seg))
        points.push_back({{"day", day}, {"ctr", ctr ? Json(*ctr) : Json(nullptr)}});
      series[seg.empty() ? "ALL" : seg] = std::move(points);
    }
    plots_["daily_ctr"] = std::move(series);
    have_report_ = true;
  }

  void aa(Json& s) {
    if (!have_report_) {
      log_ = ensure_segments(log_, cfg_.seed);
      report_ = rates(attribute(log_, cfg_.windows, cfg_.gate));
    }
    const auto verdict = compare_aa(report_, cfg_.aa_days, cfg_.aa);
    s["verdict"] = verdict.to_json();
  }

  const PipelineConfig& cfg_;
  EventLog log_;
  std::vector<RejectedRow> rejects_;
  CleaningReport cleaning_;
  MetricsReport report_;
  bool have_report_ = false;
  Json metrics_ = nullptr;
  Json stages_ = Json::array();
  Json plots_ = Json::object();
  int exit_ = kExitOk;
  bool stopped_ = false;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const EventLog& input, std::vector<RejectedRow> rejects) {
  return Runner(cfg, input, std::move(rejects)).run();
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  if (cfg.input_path.empty()) throw Error(ErrorCode::ConfigInvalid, "input.path is not set");
  if (!fs::exists(cfg.input_path)) throw Error(ErrorCode::ConfigInvalid, "input file " + cfg.input_path + " does not exist");
  std::vector<RejectedRow> rejects;
  const bool lenient = cfg.enabled("ingest");
  EventLog log = read_log_file(cfg.input_path, cfg.input_format, cfg.validate, lenient ? &rejects : nullptr);
  auto result = run_pipeline(cfg, log, std::move(rejects));
  if (!cfg.output_log.empty()) {
    std::ostringstream out;
    write_jsonl(out, result.log);
    write_text_file(cfg.output_log, out.str());
  }
  if (!cfg.output_report.empty()) write_text_file(cfg.output_report, result.report.dump(2) + "\n");
  if (!cfg.output_plots.empty()) write_text_file(cfg.output_plots, result.plots.dump() + "\n");
  return result;
}

}  // namespace clickprep
