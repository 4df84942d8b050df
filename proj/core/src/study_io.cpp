#include <fstream>
#include <sstream>

#include "igss/decimal.hpp"
#include "igss/study.hpp"
#include "json_codec.hpp"

namespace igss {

using codec::Json;

namespace {

Json execution_json(const ExecutionError& e) {
  return {{"translation_sigma_mm", e.translation_sigma}, {"rotation_sigma_rad", e.rotation_sigma}};
}

ExecutionError execution_from(const Json& j, ExecutionError fallback) {
  return {codec::get_or<double>(j, "translation_sigma_mm", fallback.translation_sigma),
          codec::get_or<double>(j, "rotation_sigma_rad", fallback.rotation_sigma)};
}

Json config_json(const StudyConfig& c) {
  Json methods = Json::array();
  for (auto m : c.methods) methods.push_back(to_string(m));
  Json scale = Json::object();
  for (const auto& [m, s] : c.noise.scale) scale[to_string(m)] = s;
  return {{"methods", methods},
          {"samples", c.samples},
          {"group_multipliers", c.group_multipliers},
          {"tool_angles_deg", c.tool_angles_deg},
          {"tracker_distances_mm", c.tracker_distances_mm},
          {"detector_distances_mm", c.detector_distances_mm},
          {"seed", c.seed},
          {"threads", c.threads},
          {"noise",
           {{"tracker_sigma_mm", c.noise.tracker_sigma_mm},
            {"tracker_depth_factor", c.noise.tracker_depth_factor},
            {"reference_distance_mm", c.noise.reference_distance_mm},
            {"landmark_sigma_mm", c.noise.landmark_sigma_mm},
            {"pixel_sigma", c.noise.pixel_sigma},
            {"angle_gain", c.noise.angle_gain},
            {"scale", scale}}},
          {"cadaver",
           {{"mode", to_string(c.mode)},
            {"method", to_string(c.cadaver_method)},
            {"technique", to_string(c.technique)},
            {"screws", c.screws},
            {"levels", c.levels},
            {"navigation_execution", execution_json(c.navigation_execution)},
            {"robot_execution", execution_json(c.robot_execution)},
            {"lumbar_screw_diameter", c.lumbar_screw_diameter},
            {"thoracic_screw_diameter", c.thoracic_screw_diameter},
            {"screw_length", c.screw_length},
            {"placement_shots", c.imaging.placement_shots},
            {"verification_shots", c.imaging.verification_shots},
            {"verification_threshold_mm", c.verification_threshold_mm},
            {"verification_probes", c.verification_probes}}}};
}

}  // namespace

StudyConfig parse_study_config(const std::string& text) {
  const Json j = codec::parse(text);
  codec::check_schema(j);
  StudyConfig c;
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j.at("methods")) c.methods.push_back(registration_method_from_string(m.get<std::string>()));
  }
  c.samples = codec::get_or<std::size_t>(j, "samples", c.samples);
  c.group_multipliers = codec::get_or(j, "group_multipliers", c.group_multipliers);
  c.tool_angles_deg = codec::get_or(j, "tool_angles_deg", c.tool_angles_deg);
  c.tracker_distances_mm = codec::get_or(j, "tracker_distances_mm", c.tracker_distances_mm);
  c.detector_distances_mm = codec::get_or(j, "detector_distances_mm", c.detector_distances_mm);
  c.seed = codec::get_or<std::uint64_t>(j, "seed", c.seed);
  c.threads = codec::get_or<int>(j, "threads", c.threads);
  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    c.noise.tracker_sigma_mm = codec::get_or(n, "tracker_sigma_mm", c.noise.tracker_sigma_mm);
    c.noise.tracker_depth_factor = codec::get_or(n, "tracker_depth_factor", c.noise.tracker_depth_factor);
    c.noise.reference_distance_mm = codec::get_or(n, "reference_distance_mm", c.noise.reference_distance_mm);
    c.noise.landmark_sigma_mm = codec::get_or(n, "landmark_sigma_mm", c.noise.landmark_sigma_mm);
    c.noise.pixel_sigma = codec::get_or(n, "pixel_sigma", c.noise.pixel_sigma);
    c.noise.angle_gain = codec::get_or(n, "angle_gain", c.noise.angle_gain);
    if (n.contains("scale")) {
      for (const auto& [k, v] : n.at("scale").items()) c.noise.scale[registration_method_from_string(k)] = v.get<double>();
    }
  }
  if (j.contains("cadaver")) {
    const Json& d = j.at("cadaver");
    if (d.contains("mode")) c.mode = mode_from_string(d.at("mode").get<std::string>());
    if (d.contains("method")) c.cadaver_method = registration_method_from_string(d.at("method").get<std::string>());
    if (d.contains("technique")) c.technique = technique_from_string(d.at("technique").get<std::string>());
    c.screws = codec::get_or(d, "screws", c.screws);
    c.levels = codec::get_or(d, "levels", c.levels);
    if (d.contains("navigation_execution")) {
      c.navigation_execution = execution_from(d.at("navigation_execution"), c.navigation_execution);
    }
    if (d.contains("robot_execution")) c.robot_execution = execution_from(d.at("robot_execution"), c.robot_execution);
    c.lumbar_screw_diameter = codec::get_or(d, "lumbar_screw_diameter", c.lumbar_screw_diameter);
    c.thoracic_screw_diameter = codec::get_or(d, "thoracic_screw_diameter", c.thoracic_screw_diameter);
    c.screw_length = codec::get_or(d, "screw_length", c.screw_length);
    c.imaging.placement_shots = codec::get_or(d, "placement_shots", c.imaging.placement_shots);
    c.imaging.verification_shots = codec::get_or(d, "verification_shots", c.imaging.verification_shots);
    c.verification_threshold_mm = codec::get_or(d, "verification_threshold_mm", c.verification_threshold_mm);
    c.verification_probes = codec::get_or(d, "verification_probes", c.verification_probes);
  }
  c.validate();
  return c;
}

std::string serialize_study_config(const StudyConfig& cfg) {
  Json j = config_json(cfg);
  j["schema_version"] = codec::kSchemaVersion;
  return j.dump(2);
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::NotFound, "cannot open study config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

std::string serialize_calibration(const std::vector<CalibrationResult>& results, const StudyConfig& cfg) {
  Json scale = Json::object(), detail = Json::array();
  for (const auto& r : results) {
    scale[to_string(r.method)] = r.scale;
    detail.push_back({{"method", to_string(r.method)},
                      {"target_mu", r.target_mu},
                      {"scale", r.scale},
                      {"achieved_mu", r.achieved_mu},
                      {"iterations", r.iterations}});
  }
  const Json j = {{"schema_version", codec::kSchemaVersion},
                  {"seed", cfg.seed},
                  {"scale", scale},
                  {"calibration", detail}};
  return j.dump(2);
}

void apply_calibration(StudyConfig& cfg, const std::string& text) {
  const Json j = codec::parse(text);
  codec::check_schema(j);
  const Json scale = codec::get<Json>(j, "scale");
  for (const auto& [k, v] : scale.items()) {
    cfg.noise.scale[registration_method_from_string(k)] = v.get<double>();
  }
}

namespace {

Json factors_json(const Factors& f) {
  return {{"group_multiplier", f.group_multiplier},
          {"tool_angle_deg", f.tool_angle_deg},
          {"tracker_distance_mm", f.tracker_distance_mm},
          {"detector_distance_mm", f.detector_distance_mm}};
}

}  // namespace

std::string phantom_report_json(const PhantomReport& report) {
  Json methods = Json::object();
  for (const auto& [m, s] : report.methods) {
    Json breakdown = Json::object();
    for (const auto& [factor, levels] : s.breakdown) {
      for (const auto& [level, st] : levels) breakdown[factor][level] = codec::stats(st);
    }
    methods[to_string(m)] = {{"stats", codec::stats(s.stats)}, {"breakdown", breakdown}};
  }
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", to_string(r.method)},
                    {"index", r.index},
                    {"factors", factors_json(r.factors)},
                    {"fre_rms", r.fre_rms}});
  }
  const Json j = {{"schema_version", codec::kSchemaVersion},
                  {"study", "phantom"},
                  {"seed", report.config.seed},
                  {"config", config_json(report.config)},
                  {"methods", methods},
                  {"rows", rows}};
  return j.dump(2);
}

std::string phantom_rows_csv(const PhantomReport& report) {
  std::string out = "method,index,group_multiplier,tool_angle_deg,tracker_distance_mm,detector_distance_mm,fre_rms\n";
  for (const auto& r : report.rows) {
    out += to_string(r.method) + ',' + std::to_string(r.index) + ',' + format_fixed6(r.factors.group_multiplier) + ',' +
           format_fixed6(r.factors.tool_angle_deg) + ',' + format_fixed6(r.factors.tracker_distance_mm) + ',' +
           format_fixed6(r.factors.detector_distance_mm) + ',' + format_fixed6(r.fre_rms) + '\n';
  }
  return out;
}

std::string cadaver_report_json(const CadaverReport& report) {
  Json grades = Json::object(), counts = Json::object();
  for (std::size_t g = 0; g < 5; ++g) {
    grades[to_string(static_cast<Grade>(g))] = report.grade_percent[g];
    counts[to_string(static_cast<Grade>(g))] = report.grade_counts[g];
  }
  Json rows = Json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"session", r.session},
                    {"screw_id", r.screw_id},
                    {"level", r.level},
                    {"side", to_string(r.side)},
                    {"registration_fre", r.registration_fre},
                    {"entry_error_mm", r.entry_error_mm},
                    {"angle_error_rad", r.angle_error_rad},
                    {"report", codec::breach(r.report)}});
  }
  Json sessions = Json::array();
  for (const auto& s : report.session_reports) sessions.push_back(Json::parse(s));
  const Json j = {{"schema_version", codec::kSchemaVersion},
                  {"study", "cadaver"},
                  {"seed", report.config.seed},
                  {"config", config_json(report.config)},
                  {"mode", to_string(report.config.mode)},
                  {"modality", to_string(modality_for(report.config.cadaver_method))},
                  {"technique", to_string(report.config.technique)},
                  {"n_screws", report.rows.size()},
                  {"grades", grades},
                  {"grade_counts", counts},
                  {"shots", {{"total", report.total_shots}, {"mean_per_screw", report.mean_shots_per_screw}}},
                  {"ledgers_consistent", report.ledgers_consistent},
                  {"registration",
                   {{"stats", codec::stats(report.registration)}, {"rejections", report.registration_rejections}}},
                  {"rows", rows},
                  {"sessions", sessions}};
  return j.dump(2);
}

std::string cadaver_rows_csv(const CadaverReport& report) {
  std::string out =
      "session,screw_id,level,side,registration_fre,entry_error_mm,angle_error_rad,max_breach_depth,"
      "anterior_perforation,grade\n";
  for (const auto& r : report.rows) {
    out += std::to_string(r.session) + ',' + r.screw_id + ',' + r.level + ',' + to_string(r.side) + ',' +
           format_fixed6(r.registration_fre) + ',' + format_fixed6(r.entry_error_mm) + ',' +
           format_fixed6(r.angle_error_rad) + ',' + format_fixed6(r.report.max_breach_depth) + ',' +
           (r.report.anterior_perforation ? "1" : "0") + ',' + to_string(r.report.grade) + '\n';
  }
  return out;
}

}  // namespace igss
