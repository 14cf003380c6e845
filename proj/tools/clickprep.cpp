// clickprep command-line front end.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "clickprep/pipeline.hpp"
#include "clickprep/server.hpp"
#include "clickprep/synth.hpp"

namespace fs = std::filesystem;
using namespace clickprep;

namespace {

struct CommonOptions {
  std::string config;
  std::vector<std::string> sets;
  std::string input;
  std::string format;
  std::string out;
  std::string report;
  std::string plots;
};

void add_common(CLI::App* app, CommonOptions& o, bool needs_input = true) {
  app->add_option("-c,--config", o.config, "pipeline config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--set", o.sets, "override a config key, e.g. clean.b2b.m=6")->take_all();
  auto* in = app->add_option("-i,--in", o.input, "input event log");
  if (needs_input) in->check(CLI::ExistingFile);
  app->add_option("--format", o.format, "input format: jsonl or csv");
  app->add_option("-o,--out", o.out, "write the resulting event log (JSONL)");
  app->add_option("-r,--report", o.report, "write the JSON report here instead of stdout");
  app->add_option("--plots", o.plots, "write plot data (JSON)");
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

// File layer, then --set overrides, then explicit flags.
Json load_config_doc(const CommonOptions& o, std::string& base_dir) {
  Json doc = Json::object();
  base_dir = ".";
  if (!o.config.empty()) {
    doc = Json::parse(read_text_file(o.config), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::ConfigInvalid, o.config + " is not a JSON object");
    base_dir = fs::absolute(o.config).parent_path().string();
  }
  for (const auto& s : o.sets) apply_override(doc, s);
  if (!o.input.empty()) doc["input"]["path"] = absolute(o.input);
  if (!o.format.empty()) doc["input"]["format"] = o.format;
  if (!o.out.empty()) doc["output"]["log"] = absolute(o.out);
  if (!o.plots.empty()) doc["output"]["plots"] = absolute(o.plots);
  return doc;
}

int finish(const PipelineResult& r, const CommonOptions& o) {
  if (o.report.empty()) {
    std::cout << r.report.dump(2) << "\n";
  } else {
    write_text_file(o.report, r.report.dump(2) + "\n");
  }
  std::cerr << "status " << r.report.at("status").get<std::string>() << ", " << r.report.at("events_in") << " events in, "
            << r.report.at("events_out") << " out\n";
  for (const auto& s : r.report.at("stages"))
    if (s.contains("error")) std::cerr << "error in " << s.at("stage").get<std::string>() << ": " << s.at("error").at("message").get<std::string>() << "\n";
  return r.exit_code;
}

// Runs the pipeline with only `only` enabled (every stage when empty).
PipelineResult run_stages(const CommonOptions& o, const std::vector<std::string>& only, Json extra = Json::object()) {
  std::string base_dir;
  Json doc = load_config_doc(o, base_dir);
  if (!only.empty())
    for (const auto& s : pipeline_stages())
      doc["stages"][s] = std::find(only.begin(), only.end(), s) != only.end();
  doc.merge_patch(extra);
  return run_pipeline(PipelineConfig::from_json(doc, base_dir));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clickstream preprocessing for recommender evaluation"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic event log with ground truth");
  std::string synth_config, synth_out, synth_truth;
  std::vector<std::string> synth_sets;
  std::optional<std::uint64_t> synth_seed;
  std::optional<std::size_t> synth_customers, synth_days;
  bool synth_zero = false;
  synth->add_option("-c,--config", synth_config, "generator config (JSON)")->check(CLI::ExistingFile);
  synth->add_option("--set", synth_sets, "override a generator field, e.g. bot_count=0")->take_all();
  synth->add_option("--seed", synth_seed);
  synth->add_option("--customers", synth_customers);
  synth->add_option("--days", synth_days);
  synth->add_flag("--zero-pathology", synth_zero, "start from the clean-only preset");
  synth->add_option("-o,--out", synth_out, "event log (JSONL)")->required();
  synth->add_option("--truth", synth_truth, "ground truth (JSON)");

  // single-stage subcommands
  CommonOptions ingest_o, identity_o, clean_o, journey_o, outliers_o, metrics_o, aa_o, run_o;
  auto* ingest = app.add_subcommand("ingest", "validate, reject and normalize currencies");
  add_common(ingest, ingest_o);
  std::string rates_file, base_currency, rejects_out;
  ingest->add_option("--rates", rates_file, "exchange-rate table (JSON)")->check(CLI::ExistingFile);
  ingest->add_option("--base", base_currency, "base currency for normalized prices");
  ingest->add_option("--rejects", rejects_out, "write rejected rows (JSONL)");

  auto* identity = app.add_subcommand("identity", "resolve customer ids from cookies and user ids");
  add_common(identity, identity_o);

  auto* clean = app.add_subcommand("clean", "deduplicate, then apply B2B, bounce, bot and new-customer rules");
  add_common(clean, clean_o);
  std::vector<std::string> clean_rules;
  std::string bots_file;
  std::optional<double> b2b_m;
  clean->add_option("--rules", clean_rules, "rules to apply, in order")->delimiter(',');
  clean->add_option("--b2b-m", b2b_m, "B2B multiplier over the median buys per day");
  clean->add_option("--bot-config", bots_file, "bot signatures: {\"user_agents\": [...], \"ips\": [...]}")
      ->check(CLI::ExistingFile);

  auto* journey = app.add_subcommand("journey", "expand combos and audit CLICK/ATC/BUY journeys");
  add_common(journey, journey_o);
  std::string combos_file;
  std::optional<bool> quick_buy;
  bool no_halt = false;
  journey->add_option("--combos", combos_file, "sku,combo_id mapping (CSV)")->check(CLI::ExistingFile);
  journey->add_option("--quick-buy", quick_buy, "site lets ATC/BUY skip the CLICK (true/false)");
  journey->add_flag("--no-halt", no_halt, "report an alarm without halting");

  auto* outliers = app.add_subcommand("outliers", "Bootlier outlier limits on views/day and buys/day");
  add_common(outliers, outliers_o);
  std::vector<std::string> outlier_metrics, limits, use_decisions;
  std::optional<std::size_t> k, iters, sample_n;
  std::optional<std::uint64_t> boot_seed;
  std::string decision_out, hist_out;
  outliers->add_option("--metric", outlier_metrics, "views and/or buys (default both)");
  outliers->add_option("--k", k, "trim depth per tail");
  outliers->add_option("--iters", iters, "bootstrap iterations");
  outliers->add_option("--N", sample_n, "bootstrap sample size (default 1% of the population)");
  outliers->add_option("--seed", boot_seed, "bootstrap seed");
  outliers->add_option("--limit", limits, "manual limit: a number with one --metric, or metric=number")->take_all();
  outliers->add_option("--use-decision", use_decisions, "limit recorded through the API")->take_all()->check(CLI::ExistingFile);
  outliers->add_option("--decision", decision_out, "write the decision (JSON); one metric only");
  outliers->add_option("--hist", hist_out, "write the Bootlier histograms (JSON)");

  auto* metrics = app.add_subcommand("metrics", "attribute interactions and compute CTR/ATC-TR/BTR");
  add_common(metrics, metrics_o);
  std::string metrics_csv;
  std::vector<std::int64_t> windows_s;
  std::optional<std::size_t> plp_top_n;
  metrics->add_option("--csv", metrics_csv, "also write the per-cell table as CSV");
  metrics->add_option("--windows", windows_s, "click,atc,buy attribution windows in seconds")->delimiter(',')->expected(3);
  metrics->add_option("--plp-top-n", plp_top_n, "PLP slots that count as visible");

  auto* aa = app.add_subcommand("aa", "A/A consistency check between segments");
  add_common(aa, aa_o);
  std::optional<std::uint64_t> aa_seed;
  std::optional<std::size_t> aa_days;
  std::string verdict_out;
  aa->add_option("--seed", aa_seed, "seed for segment assignment");
  aa->add_option("--days", aa_days, "compare the first this many days");
  aa->add_option("--verdict", verdict_out, "write the verdict (JSON)");

  auto* run = app.add_subcommand("run", "run every enabled stage");
  add_common(run, run_o, false);

  auto* serve_cmd = app.add_subcommand("serve", "local JSON API for the Bootlier inspector");
  CommonOptions serve_o;
  add_common(serve_cmd, serve_o);
  int port = 8765;
  std::string decision_dir = "decisions", static_dir;
  serve_cmd->add_option("-p,--port", port, "loopback port")->capture_default_str();
  serve_cmd->add_option("--decisions", decision_dir, "directory for recorded decisions");
  serve_cmd->add_option("--static", static_dir, "serve the inspector UI from this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      Json doc = Json::object();
      if (!synth_config.empty()) doc = Json::parse(read_text_file(synth_config));
      SynthConfig cfg = synth_zero ? SynthConfig::zero_pathology() : SynthConfig{};
      Json base = cfg.to_json();
      base.merge_patch(doc);
      for (const auto& s : synth_sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "override '" + s + "' must look like key=value");
        Json v = Json::parse(s.substr(eq + 1), nullptr, false);
        base[s.substr(0, eq)] = v.is_discarded() ? Json(s.substr(eq + 1)) : v;
      }
      if (synth_seed) base["seed"] = *synth_seed;
      if (synth_customers) base["customers"] = *synth_customers;
      if (synth_days) base["days"] = *synth_days;
      cfg = SynthConfig::from_json(base);
      const auto result = generate(cfg);
      std::ostringstream out;
      write_jsonl(out, result.log);
      write_text_file(synth_out, out.str());
      if (!synth_truth.empty()) write_text_file(synth_truth, result.truth.to_json().dump(2) + "\n");
      std::cerr << result.log.size() << " events, " << cfg.customers << " customers\n";
      return kExitOk;
    }
    if (*ingest) {
      Json extra = Json::object();
      if (!rates_file.empty()) extra["ingest"]["rates_file"] = absolute(rates_file);
      if (!base_currency.empty()) extra["ingest"]["base_currency"] = base_currency;
      auto result = run_stages(ingest_o, {"ingest"}, extra);
      if (!rejects_out.empty()) {
        std::string lines;
        for (const auto& row : result.report.at("stages").at(0).value("rejects", Json::array())) lines += row.dump() + "\n";
        write_text_file(rejects_out, lines);
      }
      return finish(result, ingest_o);
    }
    if (*identity) return finish(run_stages(identity_o, {"identity"}), identity_o);
    if (*clean) {
      Json extra = Json::object();
      if (!clean_rules.empty()) extra["clean"]["rules"] = clean_rules;
      if (b2b_m) extra["clean"]["b2b"]["m"] = *b2b_m;
      if (!bots_file.empty()) extra["clean"]["bots_file"] = absolute(bots_file);
      return finish(run_stages(clean_o, {"dedup", "clean"}, extra), clean_o);
    }
    if (*journey) {
      Json extra = Json::object();
      if (!combos_file.empty()) extra["journey"]["combos_file"] = absolute(combos_file);
      if (quick_buy) extra["journey"]["quick_buy"] = *quick_buy;
      if (no_halt) extra["journey"]["halt_on_alarm"] = false;
      return finish(run_stages(journey_o, {"journey"}, extra), journey_o);
    }
    if (*outliers) {
      Json extra = Json::object();
      std::vector<std::string> chosen;
      for (const auto& m : outlier_metrics)
        chosen.push_back(parse_activity_metric(m) == ActivityMetric::ViewsPerDay ? "views" : "buys");
      if (!chosen.empty()) extra["outliers"]["metrics"] = chosen;
      for (const std::string name : {"views", "buys"}) {
        if (!chosen.empty() && std::find(chosen.begin(), chosen.end(), name) == chosen.end()) continue;
        if (k) extra["outliers"][name]["trim"] = *k;
        if (iters) extra["outliers"][name]["iterations"] = *iters;
        if (sample_n) extra["outliers"][name]["sample_size"] = *sample_n;
        if (boot_seed) extra["outliers"][name]["seed"] = *boot_seed;
      }
      for (const auto& l : limits) {
        const auto eq = l.find('=');
        std::string name;
        if (eq == std::string::npos) {
          if (chosen.size() != 1) throw Error(ErrorCode::ConfigInvalid, "--limit without metric= needs exactly one --metric");
          name = chosen.front();
        } else {
          name = parse_activity_metric(l.substr(0, eq)) == ActivityMetric::ViewsPerDay ? "views" : "buys";
        }
        extra["outliers"]["limits"][name] = std::stoll(eq == std::string::npos ? l : l.substr(eq + 1));
      }
      for (const auto& d : use_decisions) {
        const auto dec = OutlierDecision::from_json(Json::parse(read_text_file(d)));
        extra["outliers"]["limits"][dec.metric == ActivityMetric::ViewsPerDay ? "views" : "buys"] = dec.final_limit;
      }
      auto result = run_stages(outliers_o, {"outliers"}, extra);
      if (result.exit_code == kExitOk) {
        const Json& section = result.report.at("stages").at(5);
        if (!decision_out.empty()) {
          if (section.at("metrics").size() != 1) throw Error(ErrorCode::ConfigInvalid, "--decision needs exactly one --metric");
          write_text_file(decision_out, section.at("metrics").at(0).at("decision").dump(2) + "\n");
        }
        if (!hist_out.empty()) write_text_file(hist_out, result.plots.value("bootlier", Json::object()).dump() + "\n");
      }
      return finish(result, outliers_o);
    }
    if (*metrics) {
      Json extra = Json::object();
      if (!windows_s.empty())
        extra["metrics"]["windows"] = {{"click_ms", windows_s[0] * 1000}, {"atc_ms", windows_s[1] * 1000}, {"buy_ms", windows_s[2] * 1000}};
      if (plp_top_n) extra["metrics"]["plp"]["top_n"] = *plp_top_n;
      auto result = run_stages(metrics_o, {"metrics"}, extra);
      if (!metrics_csv.empty() && result.exit_code == kExitOk) {
        const auto cfg = PipelineConfig::from_json(result.report.at("config"));
        write_text_file(metrics_csv, rates(attribute(result.log, cfg.windows, cfg.gate)).to_csv());
      }
      return finish(result, metrics_o);
    }
    if (*aa) {
      Json extra = Json::object();
      if (aa_seed) extra["seed"] = *aa_seed;
      if (aa_days) extra["aa"]["days"] = *aa_days;
      // Daily CTR per segment comes from the metrics stage.
      auto result = run_stages(aa_o, {"metrics", "aa"}, extra);
      if (!verdict_out.empty() && result.exit_code == kExitOk)
        write_text_file(verdict_out, result.report.at("stages").at(7).at("verdict").dump(2) + "\n");
      return finish(result, aa_o);
    }
    if (*run) return finish(run_stages(run_o, {}), run_o);
    if (*serve_cmd) {
      std::string base_dir;
      const auto cfg = PipelineConfig::from_json(load_config_doc(serve_o, base_dir), base_dir);
      if (cfg.input_path.empty()) throw Error(ErrorCode::NoPopulationLoaded, "serve needs --in");
      auto log = read_log_file(cfg.input_path, cfg.input_format, cfg.validate);
      ApiService service(std::move(log), decision_dir, cfg.views_params, cfg.buys_params);
      std::cerr << "listening on http://127.0.0.1:" << port << "\n";
      serve(service, port, static_dir);
      return kExitOk;
    }
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitError;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}
