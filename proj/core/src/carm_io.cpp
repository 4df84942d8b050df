#include <sstream>

#include "igss/carm.hpp"
#include "igss/decimal.hpp"
#include "igss/error.hpp"

namespace igss {

std::string serialize_projection(const ProjectionImage& image) {
  const auto& c = image.carm;
  std::string out = "format igss-projection 1\n";
  out += "view " + to_string(image.view_tag) + "\n";
  out += "shot " + std::to_string(image.shot_index) + "\n";
  out += "source_detector_distance " + format_fixed6(c.source_detector_distance) + "\n";
  out += "pixel_pitch " + format_fixed6(c.pixel_pitch) + "\n";
  out += "detector " + std::to_string(c.detector_width) + " " + std::to_string(c.detector_height) + "\n";
  out += "principal_point " + format_fixed6(c.principal_u) + " " + format_fixed6(c.principal_v) + "\n";
  out += "detections " + std::to_string(image.detections.size()) + "\n";
  for (const auto& d : image.detections) {
    out += (d.label.empty() ? std::string("?") : d.label) + " " + format_fixed6(d.u) + " " + format_fixed6(d.v) + "\n";
  }
  return out;
}

namespace {

std::vector<std::string> expect_line(std::istringstream& in, const std::string& key, std::size_t n_values) {
  std::string line;
  if (!std::getline(in, line)) raise(ErrorKind::ParseError, "missing '" + key + "' line");
  std::istringstream ls(line);
  std::string k;
  ls >> k;
  if (k != key) raise(ErrorKind::ParseError, "expected '" + key + "', got '" + k + "'");
  std::vector<std::string> vals;
  std::string v;
  while (ls >> v) vals.push_back(v);
  if (vals.size() != n_values) raise(ErrorKind::ParseError, "wrong field count on '" + key + "' line");
  return vals;
}

}  // namespace

ProjectionImage parse_projection(const std::string& text) {
  std::istringstream in(text);
  ProjectionImage img;
  const auto fmt = expect_line(in, "format", 2);
  if (fmt[0] != "igss-projection" || fmt[1] != "1") raise(ErrorKind::ParseError, "unsupported projection format");
  img.view_tag = view_tag_from_string(expect_line(in, "view", 1)[0]);
  const long long shot = parse_int(expect_line(in, "shot", 1)[0]);
  if (shot < 0) raise(ErrorKind::ParseError, "negative shot index");
  img.shot_index = static_cast<std::uint64_t>(shot);
  img.carm.source_detector_distance = parse_double(expect_line(in, "source_detector_distance", 1)[0]);
  img.carm.pixel_pitch = parse_double(expect_line(in, "pixel_pitch", 1)[0]);
  const auto det = expect_line(in, "detector", 2);
  img.carm.detector_width = static_cast<int>(parse_int(det[0]));
  img.carm.detector_height = static_cast<int>(parse_int(det[1]));
  const auto pp = expect_line(in, "principal_point", 2);
  img.carm.principal_u = parse_double(pp[0]);
  img.carm.principal_v = parse_double(pp[1]);
  img.carm.validate();
  const long long n = parse_int(expect_line(in, "detections", 1)[0]);
  if (n < 0) raise(ErrorKind::ParseError, "negative detection count");
  for (long long i = 0; i < n; ++i) {
    std::string line;
    if (!std::getline(in, line)) raise(ErrorKind::ParseError, "truncated detection list");
    std::istringstream ls(line);
    std::string label, u, v, extra;
    if (!(ls >> label >> u >> v) || (ls >> extra)) raise(ErrorKind::ParseError, "bad detection line");
    img.detections.push_back({label == "?" ? std::string() : label, parse_double(u), parse_double(v)});
  }
  std::string rest;
  while (std::getline(in, rest)) {
    if (!rest.empty()) raise(ErrorKind::ParseError, "trailing content after detections");
  }
  return img;
}

}  // namespace igss
