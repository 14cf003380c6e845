#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "clickprep/pipeline.hpp"
#include "clickprep/synth.hpp"

namespace py = pybind11;
using namespace clickprep;

namespace {

std::string to_jsonl(const EventLog& log) {
  std::ostringstream out;
  write_jsonl(out, log);
  return out.str();
}

EventLog from_jsonl(const std::string& text, bool strict) {
  std::istringstream in(text);
  auto parsed = parse_events(in, InputFormat::Jsonl, {}, "<python>");
  if (strict && !parsed.rejects.empty())
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(parsed.rejects.front().line) + ": " +
                                                parsed.rejects.front().message);
  return std::move(parsed.log);
}

ActivityPopulation bare_population(const std::vector<std::int64_t>& values) {
  ActivityPopulation pop;
  pop.values = values;
  for (std::size_t i = 0; i < values.size(); ++i) pop.keys.push_back({"v" + std::to_string(i), 0});
  return pop;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "clickprep native core; JSON documents cross the boundary as strings";

  static py::exception<Error> error(m, "NativeError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::tuple args = py::make_tuple(std::string(to_string(e.code())), e.what());
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  m.def("hampel_limit", &hampel_limit, py::arg("median"), py::arg("mad"), py::arg("x") = 2.0);
  m.def("median", [](std::vector<double> v) { return median(std::move(v)); });
  m.def("mad", [](const std::vector<double>& v) { return mad(std::span<const double>(v)); });

  m.def(
      "bootlier",
      [](const std::vector<std::int64_t>& values, const std::string& params) {
        const auto p = BootlierParams::from_json(Json::parse(params), BootlierParams::defaults_for(ActivityMetric::ViewsPerDay));
        const auto hist = bootlier_histogram(values, p);
        Json out = hist.to_json();
        out["modality"] = modality(hist, p.prominence, p.noise_prominence).to_json();
        return out.dump();
      },
      py::arg("values"), py::arg("params") = "{}");
  m.def(
      "find_outlier_limit",
      [](const std::vector<std::int64_t>& values, const std::string& params) {
        const auto p = BootlierParams::from_json(Json::parse(params), BootlierParams::defaults_for(ActivityMetric::ViewsPerDay));
        return find_outlier_limit(bare_population(values), p).to_json().dump();
      },
      py::arg("values"), py::arg("params") = "{}");

  m.def("compare_aa", [](const std::vector<double>& a1, const std::vector<double>& a2, double diff_max, double corr_min,
                         std::size_t min_days) {
    return compare_aa(a1, a2, AAThresholds{diff_max, corr_min, min_days}).to_json().dump();
  });

  m.def("default_config", [] { return PipelineConfig::default_json().dump(); });
  m.def("default_synth_config", [] { return SynthConfig{}.to_json().dump(); });
  m.def("zero_pathology_config", [] { return SynthConfig::zero_pathology().to_json().dump(); });

  m.def("synth", [](const std::string& config) {
    const auto r = generate(SynthConfig::from_json(Json::parse(config)));
    return py::make_tuple(to_jsonl(r.log), r.truth.to_json().dump());
  });

  m.def(
      "run_pipeline",
      [](const std::string& config, const std::string& events, const std::string& base_dir) {
        const auto cfg = PipelineConfig::from_json(Json::parse(config), base_dir);
        std::vector<RejectedRow> rejects;
        std::istringstream in(events);
        auto parsed = parse_events(in, InputFormat::Jsonl, cfg.validate, "<python>");
        if (!cfg.enabled("ingest") && !parsed.rejects.empty())
          throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(parsed.rejects.front().line) + ": " +
                                                      parsed.rejects.front().message);
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(cfg, parsed.log, std::move(parsed.rejects));
        }
        return py::make_tuple(r.exit_code, r.report.dump(), r.plots.dump(), to_jsonl(r.log));
      },
      py::arg("config"), py::arg("events"), py::arg("base_dir") = ".");

  m.def("normalize_jsonl", [](const std::string& events) { return to_jsonl(from_jsonl(events, true)); });
}
