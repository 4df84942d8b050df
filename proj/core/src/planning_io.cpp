#include "igss/planning.hpp"

#include "json_codec.hpp"

namespace igss {

using codec::Json;

std::string serialize_plan(const ScrewPlan& plan) {
  Json j = codec::plan(plan);
  j["schema_version"] = codec::kSchemaVersion;
  return j.dump(2);
}

ScrewPlan parse_plan(const std::string& text) {
  const Json j = codec::parse(text);
  codec::check_schema(j);
  return codec::plan(j);
}

std::string serialize_breach_report(const ScrewPlan& plan, const BreachReport& report) {
  Json j = codec::breach(report);
  j["plan"] = codec::plan(plan);
  j["schema_version"] = codec::kSchemaVersion;
  return j.dump(2);
}

BreachReport parse_breach_report(const std::string& text) {
  const Json j = codec::parse(text);
  codec::check_schema(j);
  BreachReport r;
  r.max_breach_depth = codec::get<double>(j, "max_breach_depth");
  const Json loc = codec::get<Json>(j, "breach_location");
  r.breach_param = codec::get<double>(loc, "param");
  r.breach_angle = codec::get<double>(loc, "angle");
  r.anterior_perforation = codec::get<bool>(j, "anterior_perforation");
  r.grade = grade_from_string(codec::get<std::string>(j, "grade"));
  if (r.max_breach_depth < 0.0) raise(ErrorKind::ParseError, "negative breach depth");
  if (grade_gertzbein(r.max_breach_depth, r.anterior_perforation) != r.grade) {
    raise(ErrorKind::ParseError, "grade inconsistent with breach depth");
  }
  return r;
}

}  // namespace igss
