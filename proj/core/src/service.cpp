#include "igss/service.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "igss/carm.hpp"
#include "igss/registration.hpp"
#include "json_codec.hpp"

namespace igss {

using codec::Json;
namespace fs = std::filesystem;

// ---- configuration ---------------------------------------------------------

ServiceConfig parse_service_config(const std::string& text) {
  const Json j = codec::parse(text);
  codec::check_schema(j);
  ServiceConfig c;
  c.verification_threshold_mm = codec::get_or(j, "verification_threshold_mm", c.verification_threshold_mm);
  c.navigation_rate_hz = codec::get_or(j, "navigation_rate_hz", c.navigation_rate_hz);
  c.tracker_noise.sigma_mm = codec::get_or(j, "tracker_sigma_mm", c.tracker_noise.sigma_mm);
  c.tracker_noise.depth_factor = codec::get_or(j, "tracker_depth_factor", c.tracker_noise.depth_factor);
  c.seed = codec::get_or<std::uint64_t>(j, "seed", c.seed);
  c.levels = codec::get_or(j, "levels", c.levels);
  if (j.contains("edges")) c.edges = parse_edge_table(j.at("edges").dump());
  if (j.contains("arm")) c.arm = parse_arm_config(j.at("arm").dump());
  if (!(c.verification_threshold_mm > 0.0)) raise(ErrorKind::InvalidArgument, "verification threshold must be > 0");
  if (!(c.navigation_rate_hz > 0.0)) raise(ErrorKind::InvalidArgument, "navigation rate must be > 0");
  if (c.tracker_noise.sigma_mm < 0.0) raise(ErrorKind::InvalidArgument, "tracker sigma must be >= 0");
  return c;
}

ServiceConfig load_service_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::NotFound, "cannot open service config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_service_config(ss.str());
}

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotFound:
      return 404;
    case ErrorKind::IllegalTransition:
    case ErrorKind::IllegalState:
      return 409;
    case ErrorKind::ParseError:
    case ErrorKind::InvalidArgument:
      return 400;
    default:
      return 422;
  }
}

// ---- helpers ---------------------------------------------------------------

namespace {

Response json_response(const Json& j, int status = 200) {
  return {status, j.dump(), "application/json"};
}

Response error_response(int status, std::string_view kind, const std::string& message) {
  const Json j = {{"schema_version", codec::kSchemaVersion}, {"error", kind}, {"message", message}};
  return json_response(j, status);
}

Json body_json(const Request& r) {
  if (r.body.empty()) return Json::object();
  Json j = codec::parse(r.body);
  if (!j.is_object()) raise(ErrorKind::ParseError, "request body must be a JSON object");
  if (j.contains("schema_version")) codec::check_schema(j);
  return j;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string part;
  std::istringstream ss(path);
  while (std::getline(ss, part, '/')) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::string query_or(const Request& r, const std::string& key, const std::string& fallback) {
  auto it = r.query.find(key);
  return it == r.query.end() ? fallback : it->second;
}

long query_long(const Request& r, const std::string& key, long fallback) {
  const std::string v = query_or(r, key, "");
  if (v.empty()) return fallback;
  try {
    std::size_t used = 0;
    const long out = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    raise(ErrorKind::ParseError, "query parameter '" + key + "' must be an integer");
  }
}

bool query_flag(const Request& r, const std::string& key) {
  const std::string v = query_or(r, key, "");
  return v == "1" || v == "true" || v == "yes";
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
  });
}

// 64-bit FNV-1a.
std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

SessionConfig session_config_from(const Json& j, SessionConfig c) {
  if (j.contains("mode")) c.mode = mode_from_string(codec::get<std::string>(j, "mode"));
  if (j.contains("modality")) c.modality = modality_from_string(codec::get<std::string>(j, "modality"));
  if (j.contains("technique")) c.technique = technique_from_string(codec::get<std::string>(j, "technique"));
  return c;
}

Json session_config_json(const SessionConfig& c) {
  return {{"mode", to_string(c.mode)}, {"modality", to_string(c.modality)}, {"technique", to_string(c.technique)}};
}

Json event_json(const Event& e) { return Json::parse(serialize_event(e)); }

Json ledger_json(const RadiationLedger& ledger) {
  Json per = Json::object();
  for (const auto& id : ledger.screws()) {
    per[id] = {{"placement", ledger.count(id, ShotPhase::PLACEMENT)},
               {"verification", ledger.count(id, ShotPhase::VERIFICATION)},
               {"total", ledger.count(id)}};
  }
  return {{"total", ledger.total()},
          {"placement", ledger.total(ShotPhase::PLACEMENT)},
          {"verification", ledger.total(ShotPhase::VERIFICATION)},
          {"mean_per_screw", ledger.mean_per_screw()},
          {"consistent", ledger.consistent()},
          {"per_screw", per}};
}

Json registration_json(const RegistrationEvent& r) {
  return {{"modality", to_string(r.modality)},
          {"image_to_drb", codec::transform(r.image_to_drb)},
          {"fre_rms", r.fre_rms},
          {"residuals", r.residuals},
          {"n_points", r.n_points}};
}

std::vector<std::string> allowed_events(const EdgeTable& table, const SessionState& s) {
  std::vector<std::string> out;
  for (const auto& name : transition_names(table)) {
    try {
      (void)apply(table, s, Event{0, 0.0, TransitionEvent{name}});
      out.push_back(name);
    } catch (const Error&) {
    }
  }
  return out;
}

const VertebraModel* find_level(const std::vector<VertebraModel>& spine, const std::string& level) {
  for (const auto& v : spine) {
    if (v.level == level) return &v;
  }
  return nullptr;
}

bool navigation_legal(WorkflowState s) {
  return s == WorkflowState::NAVIGATION || s == WorkflowState::ROBOT_ALIGNED || s == WorkflowState::SCREW_PLACED ||
         s == WorkflowState::VERIFICATION_IMAGING;
}

}  // namespace

// ---- per-session runtime state --------------------------------------------

struct Service::Entry {
  std::unique_ptr<Session> session;
  std::mutex mutex;  // navigation and robot state below
  std::shared_ptr<PoseBroadcaster> poses;
  std::unique_ptr<NavigationProducer> producer;
  std::shared_ptr<Subscription> poll;
  std::optional<std::string> nav_plan_id;
  double nav_rate_hz = 0.0;
  std::optional<std::pair<std::string, Alignment>> pending;
  std::ofstream log_file;

  void stop_navigation() {
    if (producer) producer->stop();
    producer.reset();
    if (poses) poses->close();
    poses.reset();
    poll.reset();
    nav_plan_id.reset();
  }
};

Service::Service(ServiceConfig config, Session::Clock clock)
    : config_(std::move(config)), clock_(std::move(clock)), room_(default_operating_room()) {
  spine_ = build_default_spine(config_.levels);
  if (config_.data_dir.empty()) return;
  fs::create_directories(config_.data_dir);
  std::vector<fs::path> logs;
  for (const auto& f : fs::directory_iterator(config_.data_dir)) {
    if (f.is_regular_file() && f.path().extension() == ".jsonl") logs.push_back(f.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& p : logs) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string id = p.stem().string();
    auto entry = std::make_shared<Entry>();
    entry->session = Session::from_log(id, config_.edges, parse_log(ss.str()), clock_);
    entry->log_file.open(p, std::ios::app);
    Entry* raw = entry.get();
    entry->session->on_append([raw](const Event& e) { raw->log_file << serialize_event(e) << '\n' << std::flush; });
    sessions_[id] = std::move(entry);
    if (id.size() > 1 && id[0] == 'S' && std::all_of(id.begin() + 1, id.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) {
      next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(id.substr(1)) + 1);
    }
  }
}

Service::~Service() {
  std::lock_guard lock(mutex_);
  for (auto& [id, e] : sessions_) {
    std::lock_guard l(e->mutex);
    e->stop_navigation();
  }
}

std::shared_ptr<Service::Entry> Service::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) raise(ErrorKind::NotFound, "no session '" + id + "'");
  return it->second;
}

std::shared_ptr<Service::Entry> Service::create(std::string id) {
  std::lock_guard lock(mutex_);
  if (id.empty()) {
    do {
      std::ostringstream ss;
      ss << 'S' << std::setw(4) << std::setfill('0') << next_id_++;
      id = ss.str();
    } while (sessions_.count(id));
  } else if (!valid_id(id)) {
    raise(ErrorKind::InvalidArgument, "session id must be 1-64 characters of [A-Za-z0-9_-]");
  } else if (sessions_.count(id)) {
    raise(ErrorKind::IllegalState, "session '" + id + "' already exists");
  }
  auto entry = std::make_shared<Entry>();
  entry->session = std::make_unique<Session>(id, config_.edges, clock_);
  if (!config_.data_dir.empty()) {
    entry->log_file.open(fs::path(config_.data_dir) / (id + ".jsonl"), std::ios::trunc);
    if (!entry->log_file) raise(ErrorKind::NotFound, "cannot write session log in " + config_.data_dir);
    Entry* raw = entry.get();
    entry->session->on_append([raw](const Event& e) { raw->log_file << serialize_event(e) << '\n' << std::flush; });
  }
  sessions_[id] = entry;
  return entry;
}

std::vector<std::string> Service::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, e] : sessions_) out.push_back(id);
  return out;
}

std::shared_ptr<Subscription> Service::subscribe(const std::string& session_id, std::size_t capacity) {
  auto entry = find(session_id);
  std::lock_guard lock(entry->mutex);
  if (!entry->poses) raise(ErrorKind::IllegalState, "navigation is not running for session '" + session_id + "'");
  return entry->poses->subscribe(capacity);
}

Response Service::handle(const Request& request) {
  try {
    return dispatch(request);
  } catch (const Error& e) {
    return error_response(http_status(e.kind()), to_string(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "ParseError", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "Internal", e.what());
  }
}

Response Service::dispatch(const Request& r) {
  const auto parts = split_path(r.path);
  if (parts.empty() || parts[0] != "v1") raise(ErrorKind::NotFound, "unknown route " + r.path);
  if (parts.size() == 2 && parts[1] == "health" && r.method == "GET") {
    return json_response({{"schema_version", codec::kSchemaVersion}, {"status", "ok"}});
  }
  if (parts.size() == 3 && parts[1] == "workflow" && parts[2] == "edges" && r.method == "GET") {
    return {200, serialize_edge_table(config_.edges), "application/json"};
  }
  if (parts.size() >= 2 && parts[1] == "sessions") {
    if (parts.size() == 2 && r.method == "POST") {
      const Json b = body_json(r);
      const SessionConfig cfg = session_config_from(b, SessionConfig{});
      auto entry = create(codec::get_or<std::string>(b, "id", ""));
      if (b.contains("mode") || b.contains("modality") || b.contains("technique")) entry->session->configure(cfg);
      Response created = route_session({"GET", r.path, {}, {}}, *entry, {});
      created.status = 201;
      return created;
    }
    if (parts.size() == 2 && r.method == "GET") {
      Json list = Json::array();
      for (const auto& id : session_ids()) {
        const auto s = find(id)->session->snapshot();
        list.push_back({{"id", id}, {"state", to_string(s->state)}, {"config", session_config_json(s->config)}});
      }
      return json_response({{"schema_version", codec::kSchemaVersion}, {"sessions", list}});
    }
    if (parts.size() >= 3) {
      auto entry = find(parts[2]);
      return route_session(r, *entry, std::vector<std::string>(parts.begin() + 3, parts.end()));
    }
  }
  raise(ErrorKind::NotFound, "unknown route " + r.method + " " + r.path);
}

Response Service::route_session(const Request& r, Entry& entry, const std::vector<std::string>& rest) {
  Session& session = *entry.session;
  const std::string& m = r.method;
  const auto envelope = [&](Json j) {
    j["schema_version"] = codec::kSchemaVersion;
    j["session_id"] = session.id();
    j["state"] = to_string(session.snapshot()->state);
    return j;
  };
  const auto is = [&](std::initializer_list<const char*> path, const char* method) {
    if (m != method || rest.size() != path.size()) return false;
    std::size_t i = 0;
    for (const char* p : path) {
      if (std::string(p) != "*" && rest[i] != p) return false;
      ++i;
    }
    return true;
  };
  const auto preview = [&](const ScrewPlan& p) -> Json {
    const VertebraModel* v = find_level(spine_, p.level);
    if (!v) return nullptr;
    return codec::breach(validate_trajectory(p, *v));
  };

  if (is({}, "GET")) {
    const auto s = session.snapshot();
    Json plans = Json::object();
    for (const auto& [id, p] : s->plans) plans[id] = codec::plan(p);
    Json outcomes = Json::object();
    for (const auto& [id, o] : s->outcomes) {
      outcomes[id] = {{"achieved", codec::plan(o.achieved)}, {"report", codec::breach(o.report)}};
    }
    Json verification = nullptr;
    if (s->verification) {
      verification = {{"rms", s->verification->rms},
                      {"threshold", s->verification->threshold},
                      {"n_probes", s->verification->n_probes},
                      {"accepted", s->verification->accepted}};
    }
    return json_response(envelope({{"config", session_config_json(s->config)},
                                   {"plans", plans},
                                   {"registration", s->registration ? registration_json(*s->registration) : Json(nullptr)},
                                   {"verification", verification},
                                   {"registration_verified", s->registration_verified},
                                   {"ledger", ledger_json(s->ledger)},
                                   {"outcomes", outcomes},
                                   {"robot_joints", s->robot_joints ? codec::joints(*s->robot_joints) : Json(nullptr)},
                                   {"events", s->events},
                                   {"allowed_events", allowed_events(session.edges(), *s)}}));
  }
  if (is({"config"}, "PUT")) {
    const Event e = session.configure(session_config_from(body_json(r), session.snapshot()->config));
    return json_response(envelope({{"event", event_json(e)}, {"config", session_config_json(session.snapshot()->config)}}));
  }
  if (is({"events"}, "GET")) {
    const long since = query_long(r, "since", 0);
    Json events = Json::array();
    for (const auto& e : session.log()) {
      if (static_cast<long>(e.seq) > since) events.push_back(event_json(e));
    }
    return json_response(envelope({{"events", events}}));
  }
  if (is({"events"}, "POST")) {
    const Event e = session.advance(codec::get<std::string>(body_json(r), "name"));
    return json_response(envelope({{"event", event_json(e)}}), 201);
  }

  // plans
  if (is({"plans"}, "GET")) {
    Json plans = Json::array();
    for (const auto& [id, p] : session.snapshot()->plans) {
      plans.push_back({{"plan_id", id}, {"plan", codec::plan(p)}, {"preview", preview(p)}});
    }
    return json_response(envelope({{"plans", plans}}));
  }
  if (is({"plans"}, "POST") || is({"plans", "*"}, "PUT")) {
    const Json b = body_json(r);
    const std::string id = rest.size() == 2 ? rest[1] : codec::get<std::string>(b, "plan_id");
    if (!valid_id(id)) raise(ErrorKind::InvalidArgument, "plan id must be 1-64 characters of [A-Za-z0-9_-]");
    const ScrewPlan p = codec::plan(codec::get<Json>(b, "plan"));
    const Event e = session.upsert_plan(id, p);
    return json_response(
        envelope({{"event", event_json(e)}, {"plan_id", id}, {"plan", codec::plan(p)}, {"preview", preview(p)}}),
        rest.size() == 1 ? 201 : 200);
  }
  if (is({"plans", "*"}, "GET")) {
    const auto s = session.snapshot();
    auto it = s->plans.find(rest[1]);
    if (it == s->plans.end()) raise(ErrorKind::NotFound, "no plan '" + rest[1] + "'");
    return json_response(envelope({{"plan_id", it->first}, {"plan", codec::plan(it->second)}, {"preview", preview(it->second)}}));
  }
  if (is({"plans", "*"}, "DELETE")) {
    const Event e = session.delete_plan(rest[1]);
    return json_response(envelope({{"event", event_json(e)}}));
  }

  // registration
  if (is({"registration", "point-based"}, "POST")) {
    const Json b = body_json(r);
    const FiducialSet image = codec::fiducials(codec::get<Json>(b, "image"), frames::kCtImage);
    const FiducialSet drb = codec::fiducials(codec::get<Json>(b, "drb"), frames::kDrb);
    const RegistrationResult fit = fit_rigid(drb, image);
    RegistrationEvent reg{Modality::POINT_BASED_PREOP_CT, fit.transform, fit.fre_rms, fit.per_point_residuals,
                          fit.n_points};
    const Event e = session.record_registration(reg);
    return json_response(envelope({{"event", event_json(e)}, {"registration", registration_json(reg)}}), 201);
  }
  if (is({"registration", "automatic"}, "POST")) {
    const Json b = body_json(r);
    const auto view = [&](const char* key) {
      const Json v = codec::get<Json>(b, key);
      TrackedProjection t;
      t.image = parse_projection(codec::get<std::string>(v, "projection"));
      t.frames = FrameGraph{}
                     .with_edge(frames::kJig, frames::kTracker, codec::transform(codec::get<Json>(v, "jig_to_tracker")))
                     .with_edge(frames::kDrb, frames::kTracker, codec::transform(codec::get<Json>(v, "drb_to_tracker")));
      return t;
    };
    const TwoViewRegistration two = register_patient_2d(view("ap"), view("lat"), default_jig());
    RegistrationEvent reg{Modality::AUTOMATIC_INTRAOP_2D, two.registration.transform, two.registration.fre_rms,
                          two.registration.per_point_residuals, two.registration.n_points};
    const Event e = session.record_registration(reg);
    return json_response(envelope({{"event", event_json(e)},
                                   {"registration", registration_json(reg)},
                                   {"view_separation_deg", rad_to_deg(two.view_separation_rad)},
                                   {"ap_residual_px", two.ap_calibration.residual_rms_px},
                                   {"lat_residual_px", two.lat_calibration.residual_rms_px}}),
                         201);
  }
  if (is({"registration", "intraop-3d"}, "POST")) {
    RegistrationEvent reg{Modality::INTRAOP_3D, codec::transform(codec::get<Json>(body_json(r), "image_to_drb")), 0.0,
                          {}, 0};
    const Event e = session.record_registration(reg);
    return json_response(envelope({{"event", event_json(e)}, {"registration", registration_json(reg)}}), 201);
  }
  if (is({"verification"}, "POST")) {
    const Json b = body_json(r);
    std::vector<Probe> probes;
    const Json list = codec::get<Json>(b, "probes");
    if (!list.is_array()) raise(ErrorKind::ParseError, "probes must be an array");
    for (const auto& p : list) probes.push_back({codec::vec3_at(p, "probed"), codec::vec3_at(p, "landmark")});
    const double threshold = codec::get_or(b, "threshold", config_.verification_threshold_mm);
    const VerificationResult v = session.verify_registration(probes, threshold);
    return json_response(envelope({{"accepted", v.accepted}, {"rms", v.rms}, {"threshold", threshold}}));
  }

  // navigation
  if (is({"navigation"}, "GET")) {
    std::lock_guard lock(entry.mutex);
    return json_response(envelope({{"running", entry.producer != nullptr},
                                   {"rate_hz", entry.producer ? entry.nav_rate_hz : config_.navigation_rate_hz},
                                   {"plan_id", entry.nav_plan_id ? Json(*entry.nav_plan_id) : Json(nullptr)},
                                   {"published", entry.poses ? entry.poses->published() : 0}}));
  }
  if (is({"navigation", "start"}, "POST")) {
    const Json b = body_json(r);
    const auto s = session.snapshot();
    if (!s->registration || !s->registration_verified) {
      raise(ErrorKind::IllegalState, "navigation requires a verified registration");
    }
    if (!navigation_legal(s->state)) {
      raise(ErrorKind::IllegalState, "navigation not available in state " + to_string(s->state));
    }
    NavigationScene scene;
    scene.drb = room_.drb;
    scene.stylus = room_.stylus;
    scene.drb_to_tracker = room_.drb_to_tracker();
    scene.image_to_drb = s->registration->image_to_drb;
    scene.noise = config_.tracker_noise;
    scene.seed = mix_seed(config_.seed ^ stable_hash(session.id()));
    std::optional<std::string> plan_id;
    if (b.contains("plan_id")) {
      plan_id = codec::get<std::string>(b, "plan_id");
    } else if (!s->plans.empty()) {
      plan_id = s->plans.begin()->first;
    }
    if (plan_id) {
      auto it = s->plans.find(*plan_id);
      if (it == s->plans.end()) raise(ErrorKind::NotFound, "no plan '" + *plan_id + "'");
      scene.plan = *it;
    } else {
      const VertebraModel& v = spine_.front();
      scene.tool_path = hover_over_plan(scene, axial_plan(v, Side::Left, 40.0, 6.5));
    }
    const double rate = codec::get_or(b, "rate_hz", config_.navigation_rate_hz);
    std::lock_guard lock(entry.mutex);
    entry.stop_navigation();
    entry.poses = std::make_shared<PoseBroadcaster>();
    entry.poll = entry.poses->subscribe(256);
    entry.producer = std::make_unique<NavigationProducer>(std::move(scene), rate, entry.poses);
    entry.nav_plan_id = plan_id;
    entry.nav_rate_hz = rate;
    entry.producer->start();
    return json_response(envelope({{"running", true},
                                   {"rate_hz", rate},
                                   {"plan_id", plan_id ? Json(*plan_id) : Json(nullptr)}}));
  }
  if (is({"navigation", "stop"}, "POST")) {
    std::lock_guard lock(entry.mutex);
    const std::uint64_t published = entry.poses ? entry.poses->published() : 0;
    entry.stop_navigation();
    return json_response(envelope({{"running", false}, {"published", published}}));
  }
  if (is({"navigation", "frames"}, "GET")) {
    std::shared_ptr<Subscription> poll;
    {
      std::lock_guard lock(entry.mutex);
      poll = entry.poll;
    }
    if (!poll) raise(ErrorKind::IllegalState, "navigation is not running");
    const long max = std::clamp(query_long(r, "max", 64), 1L, 1024L);
    const long wait = std::clamp(query_long(r, "wait_ms", 0), 0L, 5000L);
    Json frames = Json::array();
    if (auto first = poll->pop(std::chrono::milliseconds(wait))) {
      frames.push_back(Json::parse(serialize_navigation_frame(session.id(), *first)));
      while (static_cast<long>(frames.size()) < max) {
        auto f = poll->pop(std::chrono::milliseconds(0));
        if (!f) break;
        frames.push_back(Json::parse(serialize_navigation_frame(session.id(), *f)));
      }
    }
    return json_response(envelope({{"frames", frames}, {"dropped", poll->dropped()}}));
  }

  // robot
  if (is({"robot", "align"}, "POST")) {
    const std::string plan_id = codec::get<std::string>(body_json(r), "plan_id");
    const auto s = session.snapshot();
    if (s->config.mode != Mode::ROBOT_ASSISTED) raise(ErrorKind::IllegalState, "robot alignment requires ROBOT_ASSISTED mode");
    if (s->state != WorkflowState::NAVIGATION) {
      raise(ErrorKind::IllegalState, "robot alignment requires NAVIGATION (current state " + to_string(s->state) + ")");
    }
    if (!s->registration) raise(ErrorKind::RegistrationMissing, "no registration result");
    auto it = s->plans.find(plan_id);
    if (it == s->plans.end()) raise(ErrorKind::NotFound, "no plan '" + plan_id + "'");
    const FrameGraph graph = FrameGraph{}
                                 .with_edge(frames::kCtImage, frames::kDrb, s->registration->image_to_drb)
                                 .with_edge(frames::kDrb, frames::kTracker, room_.drb_to_tracker())
                                 .with_edge(frames::kRobotBase, frames::kTracker, room_.robot_base_to_tracker());
    const JointState current = s->robot_joints.value_or(room_.robot_home);
    Alignment a = align_to_plan(it->second, graph, config_.arm, current, room_.obstacles_in_base());
    const Json out = envelope({{"plan_id", plan_id},
                               {"target", codec::joints(a.target)},
                               {"guide_pose", codec::transform(a.guide.pose)},
                               {"waypoints", a.trajectory.waypoints.size()},
                               {"dt", a.trajectory.dt},
                               {"via_retract", a.trajectory.via_retract},
                               {"min_clearance", a.trajectory.min_clearance}});
    std::lock_guard lock(entry.mutex);
    entry.pending = std::make_pair(plan_id, std::move(a));
    return json_response(out);
  }
  if (is({"robot", "trajectory"}, "GET")) {
    std::lock_guard lock(entry.mutex);
    if (!entry.pending) raise(ErrorKind::IllegalState, "no pending robot alignment");
    const Trajectory& t = entry.pending->second.trajectory;
    if (query_or(r, "format", "json") == "text") return {200, export_trajectory(t), "text/plain"};
    Json wps = Json::array();
    for (const auto& q : t.waypoints) wps.push_back(codec::joints(q));
    return json_response(envelope({{"plan_id", entry.pending->first},
                                   {"dt", t.dt},
                                   {"via_retract", t.via_retract},
                                   {"min_clearance", t.min_clearance},
                                   {"waypoints", wps}}));
  }
  if (is({"robot", "confirm"}, "POST")) {
    std::lock_guard lock(entry.mutex);
    if (!entry.pending) raise(ErrorKind::IllegalState, "no pending robot alignment to confirm");
    const auto& [plan_id, a] = *entry.pending;
    const Event e = session.record_robot_alignment(plan_id, a.target, a.trajectory.min_clearance);
    entry.pending.reset();
    return json_response(envelope({{"event", event_json(e)}}), 201);
  }

  // imaging and outcomes
  if (is({"shots"}, "POST")) {
    const Json b = body_json(r);
    const ShotPhase phase = shot_phase_from_string(codec::get_or<std::string>(b, "phase", "placement"));
    const Event e = session.record_shot(codec::get<std::string>(b, "screw_id"), phase);
    return json_response(envelope({{"event", event_json(e)}, {"ledger", ledger_json(session.snapshot()->ledger)}}), 201);
  }
  if (is({"screws", "*", "result"}, "POST")) {
    const Json b = body_json(r);
    const std::string& screw_id = rest[1];
    ScrewPlan achieved;
    if (b.contains("achieved")) {
      achieved = codec::plan(b.at("achieved"));
    } else {
      const auto s = session.snapshot();
      auto it = s->plans.find(screw_id);
      if (it == s->plans.end()) raise(ErrorKind::NotFound, "no plan '" + screw_id + "' and no achieved trajectory");
      achieved = it->second;
    }
    const VertebraModel* v = find_level(spine_, achieved.level);
    if (!v) raise(ErrorKind::UnknownLevel, "level " + achieved.level + " is not in the service spine");
    const BreachReport report = validate_trajectory(achieved, *v);
    const Event e = session.record_screw_result(screw_id, achieved, report);
    return json_response(envelope({{"event", event_json(e)}, {"report", codec::breach(report)}}), 201);
  }
  if (is({"report"}, "GET")) {
    return {200, session.report(query_flag(r, "interim")), "application/json"};
  }
  raise(ErrorKind::NotFound, "unknown route " + r.method + " " + r.path);
}

}  // namespace igss
