#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "clickprep/outliers.hpp"

namespace clickprep {

struct ApiRequest {
  std::string method;  // "GET" or "POST"
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  Json body;
};

/// State behind the inspector API. Decisions persist as
/// `<decision_dir>/decision_<metric>.json`; an empty dir keeps them in memory.
class ApiService {
 public:
  ApiService(EventLog log, std::string decision_dir, BootlierParams views = BootlierParams::defaults_for(ActivityMetric::ViewsPerDay),
             BootlierParams buys = BootlierParams::defaults_for(ActivityMetric::BuysPerDay));

  /// Thread safe. Bootstrap work is serialized per metric.
  ApiResponse handle(const ApiRequest& request);

  const std::string& decision_dir() const { return decision_dir_; }

 private:
  struct MetricState {
    std::mutex lock;
    std::optional<ActivityPopulation> population;
    std::optional<OutlierDecision> decision;
    std::vector<Json> history;
  };

  MetricState& state(ActivityMetric m);
  const ActivityPopulation& population(MetricState& st, ActivityMetric m);
  ApiResponse get_population(const ApiRequest& r);
  ApiResponse post_bootlier(const ApiRequest& r);
  ApiResponse post_decision(const ApiRequest& r);
  ApiResponse get_decision(const ApiRequest& r);
  std::string decision_path(ActivityMetric m) const;

  EventLog log_;
  std::string decision_dir_;
  BootlierParams views_;
  BootlierParams buys_;
  MetricState views_state_;
  MetricState buys_state_;
};

/// HTTP status for a library error code.
int http_status(ErrorCode code);

/// Serves the API (and `static_dir`, when set) on loopback until the process
/// stops. Throws Error(PortBusy) when the port cannot be bound.
void serve(ApiService& service, int port, const std::string& static_dir = "", const std::string& host = "127.0.0.1");

}  // namespace clickprep
