#include <sstream>

#include "igss/decimal.hpp"
#include "igss/error.hpp"
#include "igss/tracking.hpp"

namespace igss {

std::string serialize_tracker_log(const std::vector<TrackerFrame>& frames) {
  std::string out = "# igss-tracker-log 1\n# timestamp_ms tool_id marker x y z visible\n";
  for (const auto& f : frames) {
    const std::string ts = format_fixed6(f.timestamp_ms);
    for (const auto& obs : f.observations) {
      for (std::size_t i = 0; i < obs.markers.size(); ++i) {
        const auto& m = obs.markers[i];
        out += ts + ' ' + obs.tool_id + ' ' + std::to_string(i) + ' ' + format_fixed6(m.position.x()) + ' ' +
               format_fixed6(m.position.y()) + ' ' + format_fixed6(m.position.z()) + ' ' +
               (m.visible ? "1" : "0") + '\n';
      }
    }
  }
  return out;
}

std::vector<TrackerFrame> parse_tracker_log(const std::string& text) {
  std::vector<TrackerFrame> frames;
  std::istringstream in(text);
  std::string line;
  std::string last_ts;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string ts, tool, idx, x, y, z, vis, extra;
    if (!(ls >> ts >> tool >> idx >> x >> y >> z >> vis) || (ls >> extra) || (vis != "0" && vis != "1")) {
      raise(ErrorKind::ParseError, "tracker log line " + std::to_string(line_no));
    }
    if (frames.empty() || ts != last_ts) {
      TrackerFrame f;
      f.timestamp_ms = parse_double(ts);
      if (!frames.empty() && !(f.timestamp_ms > frames.back().timestamp_ms)) {
        raise(ErrorKind::ParseError, "timestamps not strictly increasing at line " + std::to_string(line_no));
      }
      frames.push_back(std::move(f));
      last_ts = ts;
    }
    auto& frame = frames.back();
    if (frame.observations.empty() || frame.observations.back().tool_id != tool) {
      if (frame.find(tool) != nullptr) raise(ErrorKind::ParseError, "tool " + tool + " split within a frame");
      frame.observations.push_back({tool, {}});
    }
    auto& obs = frame.observations.back();
    if (parse_int(idx) != static_cast<long long>(obs.markers.size())) {
      raise(ErrorKind::ParseError, "marker index out of order at line " + std::to_string(line_no));
    }
    obs.markers.push_back({Vec3(parse_double(x), parse_double(y), parse_double(z)), vis == "1"});
  }
  return frames;
}

}  // namespace igss
