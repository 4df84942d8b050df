#include <fstream>
#include <sstream>

#include "igss/robot.hpp"
#include "json_codec.hpp"

namespace igss {

using codec::Json;

std::string serialize_arm_config(const ArmModel& arm) {
  Json dh = Json::array(), limits = Json::array(), vmax = Json::array(), caps = Json::array();
  for (const auto& row : arm.dh) {
    dh.push_back({{"a", row.a}, {"alpha", row.alpha}, {"d", row.d}, {"theta_offset", row.theta_offset}});
  }
  for (const auto& l : arm.limits) limits.push_back({l.min, l.max});
  for (double v : arm.max_velocity) vmax.push_back(v);
  for (const auto& c : arm.capsules) {
    caps.push_back({{"link", c.link},
                    {"p0", codec::vec3(c.capsule.p0)},
                    {"p1", codec::vec3(c.capsule.p1)},
                    {"radius", c.capsule.radius}});
  }
  const Json j = {{"schema_version", codec::kSchemaVersion},
                  {"dh", dh},
                  {"limits", limits},
                  {"max_velocity", vmax},
                  {"capsules", caps},
                  {"tool", codec::transform(arm.tool)}};
  return j.dump(2);
}

ArmModel parse_arm_config(const std::string& text) {
  const Json j = codec::parse(text);
  codec::check_schema(j);
  ArmModel arm;
  const auto dh = codec::get<Json>(j, "dh");
  const auto limits = codec::get<Json>(j, "limits");
  const auto vmax = codec::get<Json>(j, "max_velocity");
  if (!dh.is_array() || dh.size() != 6 || !limits.is_array() || limits.size() != 6 || !vmax.is_array() ||
      vmax.size() != 6) {
    raise(ErrorKind::ParseError, "arm config needs 6 dh rows, limits and max_velocity entries");
  }
  for (std::size_t i = 0; i < 6; ++i) {
    arm.dh[i] = {codec::get<double>(dh[i], "a"), codec::get<double>(dh[i], "alpha"), codec::get<double>(dh[i], "d"),
                 codec::get_or<double>(dh[i], "theta_offset", 0.0)};
    if (!limits[i].is_array() || limits[i].size() != 2) raise(ErrorKind::ParseError, "limit must be [min, max]");
    arm.limits[i] = {limits[i][0].get<double>(), limits[i][1].get<double>()};
    arm.max_velocity[i] = vmax[i].get<double>();
  }
  for (const auto& c : codec::get<Json>(j, "capsules")) {
    arm.capsules.push_back(
        {codec::get<int>(c, "link"), {codec::vec3_at(c, "p0"), codec::vec3_at(c, "p1"), codec::get<double>(c, "radius")}});
  }
  arm.tool = j.contains("tool") ? codec::transform(j.at("tool")) : RigidTransform::identity();
  arm.validate();
  return arm;
}

ArmModel load_arm_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::NotFound, "cannot open arm config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_arm_config(ss.str());
}

}  // namespace igss
