// nlohmann::json conversions shared by the serializers and the service.
#pragma once

#include <json.hpp>

#include "igss/error.hpp"
#include "igss/geometry.hpp"
#include "igss/planning.hpp"
#include "igss/registration.hpp"
#include "igss/robot.hpp"

namespace igss::codec {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Throws ParseError with the offending key.
template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) raise(ErrorKind::ParseError, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::ParseError, std::string("field '") + key + "': " + e.what());
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key);
}

Json parse(const std::string& text);
void check_schema(const Json& j);

Json vec3(const Vec3& v);
Vec3 vec3(const Json& j);
Vec3 vec3_at(const Json& j, const char* key);

// {"rotation": [[r00, r01, r02], ...], "translation": [x, y, z]}
Json transform(const RigidTransform& t);
RigidTransform transform(const Json& j);

Json joints(const JointState& q);
JointState joints(const Json& j);

// {"type": "sphere", "center", "radius"} or {"type": "capsule", "p0", "p1", "radius"}
Json obstacle(const Obstacle& o);
Obstacle obstacle(const Json& j);

Json plan(const ScrewPlan& p);
ScrewPlan plan(const Json& j);

Json breach(const BreachReport& r);

Json stats(const StudyStats& s);

Json fiducials(const FiducialSet& set);
FiducialSet fiducials(const Json& j, const FrameId& frame);

}  // namespace igss::codec
