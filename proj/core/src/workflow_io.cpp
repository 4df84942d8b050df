#include <sstream>

#include "igss/workflow.hpp"
#include "json_codec.hpp"

namespace igss {

using codec::Json;

std::string serialize_edge_table(const EdgeTable& table) {
  Json edges = Json::array();
  for (const auto& e : table) {
    edges.push_back({{"from", to_string(e.from)}, {"event", e.event}, {"to", to_string(e.to)}, {"guard", to_string(e.guard)}});
  }
  return Json{{"schema_version", codec::kSchemaVersion}, {"edges", edges}}.dump(2);
}

EdgeTable parse_edge_table(const std::string& text) {
  const Json j = codec::parse(text);
  codec::check_schema(j);
  EdgeTable table;
  for (const auto& e : codec::get<Json>(j, "edges")) {
    table.push_back({workflow_state_from_string(codec::get<std::string>(e, "from")), codec::get<std::string>(e, "event"),
                     workflow_state_from_string(codec::get<std::string>(e, "to")),
                     guard_from_string(codec::get_or<std::string>(e, "guard", "none"))});
    if (table.back().event.empty()) raise(ErrorKind::ParseError, "edge with empty event name");
  }
  return table;
}

namespace {

struct TypeName {
  std::string operator()(const TransitionEvent&) const { return "transition"; }
  std::string operator()(const ConfigureEvent&) const { return "configure"; }
  std::string operator()(const PlanUpsertEvent&) const { return "plan_upsert"; }
  std::string operator()(const PlanDeleteEvent&) const { return "plan_delete"; }
  std::string operator()(const RegistrationEvent&) const { return "registration"; }
  std::string operator()(const VerificationEvent&) const { return "verification"; }
  std::string operator()(const ShotEvent&) const { return "shot"; }
  std::string operator()(const RobotAlignedEvent&) const { return "robot_aligned"; }
  std::string operator()(const ScrewResultEvent&) const { return "screw_result"; }
};

Json config_json(const SessionConfig& c) {
  return {{"mode", to_string(c.mode)}, {"modality", to_string(c.modality)}, {"technique", to_string(c.technique)}};
}

struct Encode {
  Json operator()(const TransitionEvent& e) const { return {{"name", e.name}}; }
  Json operator()(const ConfigureEvent& e) const { return config_json(e.config); }
  Json operator()(const PlanUpsertEvent& e) const { return {{"plan_id", e.plan_id}, {"plan", codec::plan(e.plan)}}; }
  Json operator()(const PlanDeleteEvent& e) const { return {{"plan_id", e.plan_id}}; }
  Json operator()(const RegistrationEvent& e) const {
    return {{"modality", to_string(e.modality)},
            {"image_to_drb", codec::transform(e.image_to_drb)},
            {"fre_rms", e.fre_rms},
            {"residuals", e.residuals},
            {"n_points", e.n_points}};
  }
  Json operator()(const VerificationEvent& e) const {
    return {{"rms", e.rms}, {"threshold", e.threshold}, {"n_probes", e.n_probes}, {"accepted", e.accepted}};
  }
  Json operator()(const ShotEvent& e) const { return {{"screw_id", e.screw_id}, {"phase", to_string(e.phase)}}; }
  Json operator()(const RobotAlignedEvent& e) const {
    return {{"plan_id", e.plan_id}, {"target", codec::joints(e.target)}, {"min_clearance", e.min_clearance}};
  }
  Json operator()(const ScrewResultEvent& e) const {
    return {{"screw_id", e.screw_id}, {"achieved", codec::plan(e.achieved)}, {"report", codec::breach(e.report)}};
  }
};

BreachReport breach_from(const Json& j) {
  BreachReport r;
  r.max_breach_depth = codec::get<double>(j, "max_breach_depth");
  const Json loc = codec::get<Json>(j, "breach_location");
  r.breach_param = codec::get<double>(loc, "param");
  r.breach_angle = codec::get<double>(loc, "angle");
  r.anterior_perforation = codec::get<bool>(j, "anterior_perforation");
  r.grade = grade_from_string(codec::get<std::string>(j, "grade"));
  return r;
}

EventPayload decode(const std::string& type, const Json& d) {
  if (type == "transition") return TransitionEvent{codec::get<std::string>(d, "name")};
  if (type == "configure") {
    return ConfigureEvent{{mode_from_string(codec::get<std::string>(d, "mode")),
                           modality_from_string(codec::get<std::string>(d, "modality")),
                           technique_from_string(codec::get<std::string>(d, "technique"))}};
  }
  if (type == "plan_upsert") return PlanUpsertEvent{codec::get<std::string>(d, "plan_id"), codec::plan(codec::get<Json>(d, "plan"))};
  if (type == "plan_delete") return PlanDeleteEvent{codec::get<std::string>(d, "plan_id")};
  if (type == "registration") {
    RegistrationEvent e;
    e.modality = modality_from_string(codec::get<std::string>(d, "modality"));
    e.image_to_drb = codec::transform(codec::get<Json>(d, "image_to_drb"));
    e.fre_rms = codec::get<double>(d, "fre_rms");
    e.residuals = codec::get<std::vector<double>>(d, "residuals");
    e.n_points = codec::get<std::size_t>(d, "n_points");
    return e;
  }
  if (type == "verification") {
    return VerificationEvent{codec::get<double>(d, "rms"), codec::get<double>(d, "threshold"),
                             codec::get<std::size_t>(d, "n_probes"), codec::get<bool>(d, "accepted")};
  }
  if (type == "shot") {
    return ShotEvent{codec::get<std::string>(d, "screw_id"), shot_phase_from_string(codec::get<std::string>(d, "phase"))};
  }
  if (type == "robot_aligned") {
    return RobotAlignedEvent{codec::get<std::string>(d, "plan_id"), codec::joints(codec::get<Json>(d, "target")),
                             codec::get<double>(d, "min_clearance")};
  }
  if (type == "screw_result") {
    return ScrewResultEvent{codec::get<std::string>(d, "screw_id"), codec::plan(codec::get<Json>(d, "achieved")),
                            breach_from(codec::get<Json>(d, "report"))};
  }
  raise(ErrorKind::ParseError, "unknown event type " + type);
}

}  // namespace

std::string event_type(const EventPayload& p) { return std::visit(TypeName{}, p); }

std::string serialize_event(const Event& e) {
  const Json j = {{"schema_version", codec::kSchemaVersion},
                  {"seq", e.seq},
                  {"t_ms", e.timestamp_ms},
                  {"type", event_type(e.payload)},
                  {"data", std::visit(Encode{}, e.payload)}};
  return j.dump();
}

Event parse_event(const std::string& line) {
  const Json j = codec::parse(line);
  codec::check_schema(j);
  Event e;
  e.seq = codec::get<std::uint64_t>(j, "seq");
  e.timestamp_ms = codec::get<double>(j, "t_ms");
  e.payload = decode(codec::get<std::string>(j, "type"), codec::get<Json>(j, "data"));
  return e;
}

std::string serialize_log(const std::vector<Event>& log) {
  std::string out;
  for (const auto& e : log) out += serialize_event(e) + '\n';
  return out;
}

std::vector<Event> parse_log(const std::string& text) {
  std::vector<Event> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_event(line));
    } catch (const Error& e) {
      raise(ErrorKind::ParseError, "event log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string build_report(const std::string& session_id, const SessionState& s, bool interim) {
  Json screws = Json::array();
  std::map<std::string, bool> ids;
  for (const auto& [id, o] : s.outcomes) ids[id] = true;
  for (const auto& id : s.ledger.screws()) ids[id] = true;
  std::array<std::size_t, 5> grade_counts{};
  for (const auto& [id, unused] : ids) {
    Json row = {{"screw_id", id},
                {"shots",
                 {{"placement", s.ledger.count(id, ShotPhase::PLACEMENT)},
                  {"verification", s.ledger.count(id, ShotPhase::VERIFICATION)},
                  {"total", s.ledger.count(id)}}}};
    if (const auto it = s.outcomes.find(id); it != s.outcomes.end()) {
      row["level"] = it->second.achieved.level;
      row["side"] = to_string(it->second.achieved.side);
      row["grade"] = to_string(it->second.report.grade);
      row["max_breach_depth"] = it->second.report.max_breach_depth;
      row["anterior_perforation"] = it->second.report.anterior_perforation;
      ++grade_counts[static_cast<std::size_t>(it->second.report.grade)];
    } else {
      row["grade"] = nullptr;
    }
    screws.push_back(row);
  }
  Json grades = Json::object();
  const std::size_t graded = s.outcomes.size();
  for (std::size_t g = 0; g < 5; ++g) {
    grades[to_string(static_cast<Grade>(g))] =
        graded == 0 ? 0.0 : 100.0 * static_cast<double>(grade_counts[g]) / static_cast<double>(graded);
  }
  Json registration = {{"attempts", s.registration_fre.size()},
                       {"fre_rms", s.registration_fre},
                       {"verified", s.registration_verified},
                       {"stats", nullptr}};
  if (s.registration_fre.size() >= 2) registration["stats"] = codec::stats(summarize(s.registration_fre));
  if (s.verification) registration["verification_rms"] = s.verification->rms;

  const Json j = {{"schema_version", codec::kSchemaVersion},
                  {"session_id", session_id},
                  {"interim", interim},
                  {"state", to_string(s.state)},
                  {"mode", to_string(s.config.mode)},
                  {"modality", to_string(s.config.modality)},
                  {"technique", to_string(s.config.technique)},
                  {"n_screws", graded},
                  {"screws", screws},
                  {"grades", grades},
                  {"shots",
                   {{"total", s.ledger.total()},
                    {"placement", s.ledger.total(ShotPhase::PLACEMENT)},
                    {"verification", s.ledger.total(ShotPhase::VERIFICATION)},
                    {"screws", s.ledger.screw_count()},
                    {"mean_per_screw", s.ledger.mean_per_screw()}}},
                  {"registration", registration}};
  return j.dump(2);
}

}  // namespace igss
