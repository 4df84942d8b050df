#include "json_codec.hpp"

namespace igss::codec {

Json parse(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::ParseError, std::string("invalid JSON: ") + e.what());
  }
}

void check_schema(const Json& j) {
  const int v = get<int>(j, "schema_version");
  if (v != kSchemaVersion) raise(ErrorKind::ParseError, "unsupported schema_version " + std::to_string(v));
}

Json vec3(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3(const Json& j) {
  if (!j.is_array() || j.size() != 3) raise(ErrorKind::ParseError, "expected a 3-vector");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) raise(ErrorKind::ParseError, "expected a 3-vector of numbers");
    v(i) = j[i].get<double>();
  }
  return v;
}

Vec3 vec3_at(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) raise(ErrorKind::ParseError, std::string("missing field '") + key + "'");
  return vec3(j.at(key));
}

Json transform(const RigidTransform& t) {
  Json rows = Json::array();
  for (int r = 0; r < 3; ++r) rows.push_back(vec3(Vec3(t.rotation().row(r).transpose())));
  return {{"rotation", rows}, {"translation", vec3(t.translation())}};
}

RigidTransform transform(const Json& j) {
  if (!j.is_object() || !j.contains("rotation")) raise(ErrorKind::ParseError, "missing field 'rotation'");
  const Json& rows = j.at("rotation");
  if (!rows.is_array() || rows.size() != 3) raise(ErrorKind::ParseError, "rotation must be 3 rows");
  Mat3 r;
  for (int i = 0; i < 3; ++i) r.row(i) = vec3(rows[i]).transpose();
  if ((r.transpose() * r - Mat3::Identity()).norm() > 1e-6 || r.determinant() < 0.0) {
    raise(ErrorKind::ParseError, "rotation is not orthonormal");
  }
  return {r, vec3_at(j, "translation")};
}

Json joints(const JointState& q) {
  Json a = Json::array();
  for (int i = 0; i < 6; ++i) a.push_back(q(i));
  return a;
}

JointState joints(const Json& j) {
  if (!j.is_array() || j.size() != 6) raise(ErrorKind::ParseError, "expected 6 joint values");
  JointState q;
  for (int i = 0; i < 6; ++i) {
    if (!j[i].is_number()) raise(ErrorKind::ParseError, "joint values must be numbers");
    q(i) = j[i].get<double>();
  }
  return q;
}

Json obstacle(const Obstacle& o) {
  if (const auto* s = std::get_if<Sphere>(&o)) {
    return {{"type", "sphere"}, {"center", vec3(s->center)}, {"radius", s->radius}};
  }
  const auto& c = std::get<Capsule>(o);
  return {{"type", "capsule"}, {"p0", vec3(c.p0)}, {"p1", vec3(c.p1)}, {"radius", c.radius}};
}

Obstacle obstacle(const Json& j) {
  const auto type = get<std::string>(j, "type");
  const double radius = get<double>(j, "radius");
  if (!(radius > 0.0)) raise(ErrorKind::ParseError, "obstacle radius must be > 0");
  if (type == "sphere") return Sphere{vec3_at(j, "center"), radius};
  if (type == "capsule") return Capsule{vec3_at(j, "p0"), vec3_at(j, "p1"), radius};
  raise(ErrorKind::ParseError, "unknown obstacle type " + type);
}

Json plan(const ScrewPlan& p) {
  return {{"level", p.level},
          {"side", to_string(p.side)},
          {"entry", vec3(p.entry)},
          {"direction", vec3(p.direction)},
          {"length", p.length},
          {"diameter", p.diameter}};
}

ScrewPlan plan(const Json& j) {
  ScrewPlan p;
  p.level = get<std::string>(j, "level");
  p.side = side_from_string(get<std::string>(j, "side"));
  p.entry = vec3_at(j, "entry");
  p.direction = vec3_at(j, "direction");
  p.length = get<double>(j, "length");
  p.diameter = get<double>(j, "diameter");
  validate_plan(p);
  return p;
}

Json breach(const BreachReport& r) {
  return {{"max_breach_depth", r.max_breach_depth},
          {"breach_location", {{"param", r.breach_param}, {"angle", r.breach_angle}}},
          {"anterior_perforation", r.anterior_perforation},
          {"grade", to_string(r.grade)}};
}

Json stats(const StudyStats& s) {
  return {{"n", s.n},
          {"mean", s.mean},
          {"sd", s.sd},
          {"mean_plus_1sd", s.mean_plus_1sd},
          {"mean_plus_196sd", s.mean_plus_196sd},
          {"mean_plus_2sd", s.mean_plus_2sd}};
}

Json fiducials(const FiducialSet& set) {
  Json a = Json::array();
  for (const auto& f : set.points) a.push_back({{"label", f.label}, {"position", vec3(f.position)}});
  return a;
}

FiducialSet fiducials(const Json& j, const FrameId& frame) {
  if (!j.is_array()) raise(ErrorKind::ParseError, "fiducials must be an array");
  FiducialSet set;
  set.frame = frame;
  for (const auto& f : j) set.points.push_back({get<std::string>(f, "label"), vec3_at(f, "position")});
  return set;
}

}  // namespace igss::codec
