#include "clickprep/server.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>

namespace clickprep {

namespace fs = std::filesystem;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InsufficientPopulation:
    case ErrorCode::EmptyPopulation:
    case ErrorCode::NoUnimodalLimit:
      return 422;
    case ErrorCode::NoPopulationLoaded:
      return 409;
    default:
      return 400;
  }
}

namespace {

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, {{"error", code}, {"message", message}}};
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ConfigInvalid, "request body must be a JSON object");
  return j;
}

ActivityMetric metric_from(const Json& body, const ApiRequest& r) {
  if (body.contains("metric")) return parse_activity_metric(body.at("metric").get<std::string>());
  auto it = r.query.find("metric");
  if (it == r.query.end()) throw Error(ErrorCode::ConfigInvalid, "metric is required");
  return parse_activity_metric(it->second);
}

}  // namespace

ApiService::ApiService(EventLog log, std::string decision_dir, BootlierParams views, BootlierParams buys)
    : log_(std::move(log)), decision_dir_(std::move(decision_dir)), views_(views), buys_(buys) {
  for (auto m : {ActivityMetric::ViewsPerDay, ActivityMetric::BuysPerDay}) {
    const auto path = decision_path(m);
    if (path.empty() || !fs::exists(path)) continue;
    std::ifstream in(path);
    state(m).decision = OutlierDecision::from_json(Json::parse(in));
  }
}

ApiService::MetricState& ApiService::state(ActivityMetric m) {
  return m == ActivityMetric::ViewsPerDay ? views_state_ : buys_state_;
}

std::string ApiService::decision_path(ActivityMetric m) const {
  if (decision_dir_.empty()) return {};
  return (fs::path(decision_dir_) / ("decision_" + std::string(m == ActivityMetric::ViewsPerDay ? "views" : "buys") +
                                     ".json"))
      .string();
}

const ActivityPopulation& ApiService::population(MetricState& st, ActivityMetric m) {
  if (log_.empty()) throw Error(ErrorCode::NoPopulationLoaded, "no event log loaded");
  if (!st.population) st.population = build_population(log_, m);
  return *st.population;
}

ApiResponse ApiService::handle(const ApiRequest& r) {
  try {
    if (r.path == "/api/population" && r.method == "GET") return get_population(r);
    if (r.path == "/api/bootlier" && r.method == "POST") return post_bootlier(r);
    if (r.path == "/api/decision" && r.method == "POST") return post_decision(r);
    if (r.path == "/api/decision" && r.method == "GET") return get_decision(r);
    return error_response(404, "NotFound", r.method + " " + r.path);
  } catch (const Error& ex) {
    return error_response(http_status(ex.code()), to_string(ex.code()), ex.what());
  } catch (const nlohmann::json::exception& ex) {
    return error_response(400, to_string(ErrorCode::ConfigInvalid), ex.what());
  }
}

ApiResponse ApiService::get_population(const ApiRequest& r) {
  const auto metric = metric_from(Json::object(), r);
  auto& st = state(metric);
  std::lock_guard guard(st.lock);
  const auto& pop = population(st, metric);
  Json rows = Json::array();
  for (std::size_t i = 0; i < pop.size(); ++i)
    rows.push_back({{"cust_id", pop.keys[i].cust_id}, {"day", pop.keys[i].day}, {"value", pop.values[i]}});
  Json body = {{"metric", to_string(metric)}, {"size", pop.size()}, {"values", pop.values}, {"rows", rows}};
  if (!pop.values.empty()) {
    const double med = median({pop.values.begin(), pop.values.end()});
    body["median"] = med;
    body["max"] = *std::max_element(pop.values.begin(), pop.values.end());
    body["mad"] = mad(std::span<const std::int64_t>(pop.values));
  }
  return {200, body};
}

ApiResponse ApiService::post_bootlier(const ApiRequest& r) {
  Json body = parse_body(r.body);
  const auto metric = metric_from(body, r);
  auto& st = state(metric);
  std::lock_guard guard(st.lock);
  const auto& pop = population(st, metric);

  std::optional<std::int64_t> limit;
  if (body.contains("limit") && !body.at("limit").is_null()) limit = body.at("limit").get<std::int64_t>();
  body.erase("metric");
  body.erase("limit");
  const auto params = BootlierParams::from_json(body, metric == ActivityMetric::ViewsPerDay ? views_ : buys_);

  std::vector<std::int64_t> kept;
  for (auto v : pop.values)
    if (!limit || v <= *limit) kept.push_back(v);
  const auto hist = bootlier_histogram(kept, params);
  const auto verdict = modality(hist, params.prominence, params.noise_prominence);
  Json out = hist.to_json();
  out["metric"] = to_string(metric);
  out["limit"] = limit ? Json(*limit) : Json(nullptr);
  out["modality"] = verdict.to_json();
  st.history.push_back({{"limit", out["limit"]}, {"verdict", to_string(verdict.verdict)}});
  return {200, out};
}

ApiResponse ApiService::post_decision(const ApiRequest& r) {
  const Json body = parse_body(r.body);
  const auto metric = metric_from(body, r);
  if (!body.contains("limit")) throw Error(ErrorCode::ConfigInvalid, "limit is required");
  auto& st = state(metric);
  std::lock_guard guard(st.lock);
  const auto& pop = population(st, metric);
  auto decision = manual_decision(pop, body.at("limit").get<std::int64_t>());

  Json out = decision.to_json();
  if (st.decision) out["previous"] = st.decision->to_json();
  if (const auto path = decision_path(metric); !path.empty()) {
    fs::create_directories(decision_dir_);
    std::ofstream file(path);
    file << decision.to_json().dump(2) << "\n";
    if (!file) throw Error(ErrorCode::UnreadableStream, "cannot write " + path);
    out["path"] = path;
  }
  st.decision = std::move(decision);
  return {200, out};
}

ApiResponse ApiService::get_decision(const ApiRequest& r) {
  const auto metric = metric_from(Json::object(), r);
  auto& st = state(metric);
  std::lock_guard guard(st.lock);
  if (!st.decision) return error_response(404, "NotFound", "no decision recorded for " + std::string(to_string(metric)));
  return {200, st.decision->to_json()};
}

void serve(ApiService& service, int port, const std::string& static_dir, const std::string& host) {
  httplib::Server server;
  auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r{req.method, req.path, {}, req.body};
    for (const auto& [k, v] : req.params) r.query[k] = v;
    const auto out = service.handle(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server.Get("/api/.*", bridge);
  server.Post("/api/.*", bridge);
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
    throw Error(ErrorCode::ConfigInvalid, "static directory " + static_dir + " does not exist");
  if (!server.bind_to_port(host, port)) throw Error(ErrorCode::PortBusy, host + ":" + std::to_string(port));
  server.listen_after_bind();
}

}  // namespace clickprep
