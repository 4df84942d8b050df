// Transport-independent workflow service. Requests and responses carry JSON
// bodies; the HTTP front end in tools/ only maps sockets onto `handle`.
//
// Routes (all under /v1):
//   GET    /health
//   GET    /workflow/edges
//   POST   /sessions                          {"id"?, "mode"?, "modality"?, "technique"?}
//   GET    /sessions
//   GET    /sessions/{id}
//   PUT    /sessions/{id}/config               {"mode", "modality", "technique"}
//   GET    /sessions/{id}/events               ?since=seq
//   POST   /sessions/{id}/events               {"name"}
//   GET    /sessions/{id}/plans
//   POST   /sessions/{id}/plans                {"plan_id", "plan"}
//   GET    /sessions/{id}/plans/{plan_id}
//   PUT    /sessions/{id}/plans/{plan_id}      {"plan"}
//   DELETE /sessions/{id}/plans/{plan_id}
//   POST   /sessions/{id}/registration/point-based  {"image": [fiducial], "drb": [fiducial]}
//   POST   /sessions/{id}/registration/automatic    {"ap": view, "lat": view}
//   POST   /sessions/{id}/registration/intraop-3d   {"image_to_drb"}
//   POST   /sessions/{id}/verification          {"probes": [{"probed", "landmark"}], "threshold"?}
//   GET    /sessions/{id}/navigation
//   POST   /sessions/{id}/navigation/start      {"plan_id"?, "rate_hz"?}
//   POST   /sessions/{id}/navigation/stop
//   GET    /sessions/{id}/navigation/frames     ?max=n&wait_ms=t
//   POST   /sessions/{id}/robot/align           {"plan_id"}
//   GET    /sessions/{id}/robot/trajectory      ?format=text
//   POST   /sessions/{id}/robot/confirm
//   POST   /sessions/{id}/shots                 {"screw_id", "phase"?: "placement" | "verification"}
//   POST   /sessions/{id}/screws/{screw_id}/result  {"achieved"?}
//   GET    /sessions/{id}/report                ?interim=1
//
// A view for automatic registration is {"projection": <projection text>,
// "jig_to_tracker": transform, "drb_to_tracker": transform}.
// Errors: {"schema_version", "error": <kind>, "message"} with 404 for
// NotFound, 409 for IllegalTransition / IllegalState, 400 for malformed
// input and 422 for every other domain error.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "igss/error.hpp"
#include "igss/pose_stream.hpp"
#include "igss/robot.hpp"
#include "igss/scene.hpp"
#include "igss/tracking.hpp"
#include "igss/workflow.hpp"

namespace igss {

struct ServiceConfig {
  EdgeTable edges = default_edge_table();
  double verification_threshold_mm = 2.0;
  double navigation_rate_hz = 30.0;
  MarkerNoise tracker_noise{0.05, 3.0};
  std::uint64_t seed = 0;
  std::vector<std::string> levels = known_levels();
  ArmModel arm = default_arm();
  std::string data_dir;  // empty: sessions live in memory only
};

// {"schema_version", "verification_threshold_mm", "navigation_rate_hz",
// "tracker_sigma_mm", "tracker_depth_factor", "seed", "levels",
// "edges": edge table document, "arm": arm document}; missing keys keep
// defaults.
ServiceConfig parse_service_config(const std::string& text);
ServiceConfig load_service_config(const std::string& path);

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

int http_status(ErrorKind kind);

class Service {
 public:
  // Reloads every "<id>.jsonl" event log found in config.data_dir.
  explicit Service(ServiceConfig config, Session::Clock clock = nullptr);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  Response handle(const Request& request);

  // Live navigation frames of a session; closed when navigation stops.
  // NotFound for an unknown session.
  std::shared_ptr<Subscription> subscribe(const std::string& session_id, std::size_t capacity = 64);

  std::vector<std::string> session_ids() const;
  const ServiceConfig& config() const { return config_; }

 private:
  struct Entry;
  std::shared_ptr<Entry> find(const std::string& id) const;
  std::shared_ptr<Entry> create(std::string id);
  Response dispatch(const Request& request);
  Response route_session(const Request& request, Entry& entry, const std::vector<std::string>& rest);

  ServiceConfig config_;
  Session::Clock clock_;
  std::vector<VertebraModel> spine_;
  OperatingRoom room_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace igss
