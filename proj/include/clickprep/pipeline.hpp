#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clickprep/behavior.hpp"
#include "clickprep/event.hpp"
#include "clickprep/ingest.hpp"
#include "clickprep/journey.hpp"
#include "clickprep/metrics.hpp"
#include "clickprep/outliers.hpp"
#include "clickprep/validation.hpp"

namespace clickprep {

/// Stage names in execution order.
inline const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages = {"ingest",  "identity", "dedup",   "clean",
                                                  "journey", "outliers", "metrics", "aa"};
  return stages;
}

struct PipelineConfig {
  std::uint64_t seed = 7;
  std::map<std::string, bool> stages;  // every stage, true by default

  std::string input_path;
  InputFormat input_format = InputFormat::Jsonl;
  ValidateOptions validate;
  std::string output_log;
  std::string output_report;
  std::string output_plots;

  std::optional<RateTable> rates;
  DedupPolicy dedup;

  std::vector<std::string> rules = {"b2b", "bounce", "bots", "newcust"};
  B2BConfig b2b;
  BotConfig bots;
  NewCustomerConfig newcust;

  JourneyPolicy journey;
  ComboMap combos;
  bool halt_on_alarm = true;

  std::vector<ActivityMetric> outlier_metrics = {ActivityMetric::ViewsPerDay, ActivityMetric::BuysPerDay};
  BootlierParams views_params = BootlierParams::defaults_for(ActivityMetric::ViewsPerDay);
  BootlierParams buys_params = BootlierParams::defaults_for(ActivityMetric::BuysPerDay);
  std::map<ActivityMetric, std::int64_t> manual_limits;

  AttributionWindows windows;
  PlpGate gate;
  double low_visibility_fraction = 0.25;

  AAThresholds aa;
  std::size_t aa_days = 0;

  // The effective configuration as loaded, echoed into the report.
  Json source = Json::object();

  bool enabled(const std::string& stage) const;

  /// The full default configuration document.
  static Json default_json();
  /// Builds a config from `j` layered over the defaults. Relative file paths
  /// resolve against `base_dir`. Throws Error(ConfigInvalid).
  static PipelineConfig from_json(const Json& j, const std::string& base_dir = ".");
};

/// Sets `dotted.key` in `doc` to `value`, parsed as JSON when it parses and
/// kept as a string otherwise. Throws Error(ConfigInvalid) on an unknown key.
void apply_override(Json& doc, const std::string& assignment);

enum ExitStatus : int { kExitOk = 0, kExitError = 1, kExitHalted = 2 };

struct PipelineResult {
  int exit_code = kExitOk;
  Json report;
  Json plots;
  EventLog log;
};

/// Runs the enabled stages in order on `input` (already parsed).
PipelineResult run_pipeline(const PipelineConfig& cfg, const EventLog& input, std::vector<RejectedRow> rejects = {});

/// Reads cfg.input_path, runs the stages and writes any configured outputs.
PipelineResult run_pipeline(const PipelineConfig& cfg);

/// Parses a log file. Rejected rows go to `rejects`; without it any rejected
/// row throws Error(MalformedRecord).
EventLog read_log_file(const std::string& path, InputFormat format, const ValidateOptions& options,
                       std::vector<RejectedRow>* rejects = nullptr);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace clickprep
