#include "igss/tracking.hpp"

#include <algorithm>
#include <cmath>

#include "igss/error.hpp"
#include "igss/registration.hpp"

namespace igss {

void validate_tool(const ToolDefinition& tool) {
  if (tool.markers.size() < 3) raise(ErrorKind::InvalidArgument, tool.tool_id + ": needs >= 3 markers");
  if (is_collinear(tool.markers)) raise(ErrorKind::InvalidArgument, tool.tool_id + ": markers are collinear");
  std::vector<double> d;
  for (std::size_t i = 0; i < tool.markers.size(); ++i) {
    for (std::size_t j = i + 1; j < tool.markers.size(); ++j) d.push_back((tool.markers[i] - tool.markers[j]).norm());
  }
  std::sort(d.begin(), d.end());
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] - d[i - 1] <= 0.5) {
      raise(ErrorKind::InvalidArgument, tool.tool_id + ": pairwise marker distances not distinct");
    }
  }
}

std::size_t ToolObservation::visible_count() const {
  return static_cast<std::size_t>(
      std::count_if(markers.begin(), markers.end(), [](const MarkerObservation& m) { return m.visible; }));
}

const ToolObservation* TrackerFrame::find(const std::string& tool_id) const {
  for (const auto& o : observations) {
    if (o.tool_id == tool_id) return &o;
  }
  return nullptr;
}

PoseEstimate estimate_tool_pose(const TrackerFrame& frame, const ToolDefinition& tool, double max_residual) {
  const ToolObservation* obs = frame.find(tool.tool_id);
  if (obs == nullptr) raise(ErrorKind::InsufficientMarkers, tool.tool_id + " not in frame");
  if (obs->markers.size() != tool.markers.size()) {
    raise(ErrorKind::InvalidArgument, tool.tool_id + ": observation/definition marker count mismatch");
  }
  std::vector<Vec3> observed, body;
  for (std::size_t i = 0; i < obs->markers.size(); ++i) {
    if (!obs->markers[i].visible) continue;
    observed.push_back(obs->markers[i].position);
    body.push_back(tool.markers[i]);
  }
  if (observed.size() < 3 || is_collinear(body)) {
    raise(ErrorKind::InsufficientMarkers,
          tool.tool_id + ": " + std::to_string(observed.size()) + " usable markers");
  }
  PoseEstimate out;
  out.body_to_tracker.pose = fit_rigid_points(observed, body);
  out.body_to_tracker.timestamp_ms = frame.timestamp_ms;
  out.n_markers = observed.size();
  double ss = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    ss += (observed[i] - out.body_to_tracker.pose.apply(body[i])).squaredNorm();
  }
  out.residual_rms = std::sqrt(ss / static_cast<double>(observed.size()));
  if (out.residual_rms > max_residual) {
    raise(ErrorKind::ResidualTooHigh, tool.tool_id + ": residual " + std::to_string(out.residual_rms) + " mm");
  }
  return out;
}

PivotCalibration pivot_calibrate(const std::vector<RigidTransform>& poses) {
  if (poses.size() < 10) raise(ErrorKind::InsufficientData, "pivot calibration needs >= 10 poses");

  double max_angle = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    for (std::size_t j = i + 1; j < poses.size(); ++j) {
      max_angle = std::max(max_angle, rotation_angle_between(poses[i].rotation(), poses[j].rotation()));
    }
  }

  const auto n = static_cast<Eigen::Index>(poses.size());
  Eigen::MatrixXd a(3 * n, 6);
  Eigen::VectorXd b(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = poses[static_cast<std::size_t>(i)];
    a.block<3, 3>(3 * i, 0) = p.rotation();
    a.block<3, 3>(3 * i, 3) = -Mat3::Identity();
    b.segment<3>(3 * i) = -p.translation();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  PivotCalibration out;
  out.condition_ratio = sv(sv.size() - 1) / sv(0);
  if (out.condition_ratio < 1e-3 || max_angle < deg_to_rad(30.0)) {
    raise(ErrorKind::IllConditioned, "pivot poses span too little orientation (ratio " +
                                         std::to_string(out.condition_ratio) + ")");
  }
  const Eigen::VectorXd x = svd.solve(b);
  out.tip_offset = x.head<3>();
  out.pivot_point = x.tail<3>();
  double ss = 0.0;
  for (const auto& p : poses) ss += (p.apply(out.tip_offset) - out.pivot_point).squaredNorm();
  out.residual_rms = std::sqrt(ss / static_cast<double>(poses.size()));
  return out;
}

RigidTransform patient_relative(const StampedPose& tool_pose, const StampedPose& drb_pose) {
  if (tool_pose.timestamp_ms != drb_pose.timestamp_ms) {
    raise(ErrorKind::TimestampMismatch, "tool and DRB poses come from different frames");
  }
  return compose(drb_pose.pose.inverse(), tool_pose.pose);
}

ToolObservation observe_tool(const ToolDefinition& tool, const RigidTransform& body_to_tracker,
                             const MarkerNoise& noise, Rng& rng) {
  ToolObservation obs;
  obs.tool_id = tool.tool_id;
  for (const auto& m : tool.markers) {
    const double nx = rng.normal(), ny = rng.normal(), nz = rng.normal();
    const Vec3 err(nx * noise.sigma_mm, ny * noise.sigma_mm, nz * noise.sigma_mm * noise.depth_factor);
    obs.markers.push_back({body_to_tracker.apply(m) + err, true});
  }
  return obs;
}

namespace {

RigidTransform interpolate(const std::vector<PoseKeyframe>& keys, double t) {
  if (keys.empty()) return {};
  if (t <= keys.front().t_ms) return keys.front().pose;
  if (t >= keys.back().t_ms) return keys.back().pose;
  auto hi = std::upper_bound(keys.begin(), keys.end(), t,
                             [](double v, const PoseKeyframe& k) { return v < k.t_ms; });
  auto lo = hi - 1;
  const double span = hi->t_ms - lo->t_ms;
  const double s = span > 0.0 ? (t - lo->t_ms) / span : 0.0;
  const Eigen::Quaterniond q0(lo->pose.rotation());
  const Eigen::Quaterniond q1(hi->pose.rotation());
  const Vec3 trans = (1.0 - s) * lo->pose.translation() + s * hi->pose.translation();
  return {q0.slerp(s, q1).toRotationMatrix(), trans};
}

}  // namespace

RigidTransform pose_at(const ScriptedTool& tool, double t_ms) { return interpolate(tool.trajectory, t_ms); }

std::vector<TrackerFrame> simulate_stream(const SceneScript& script, const StreamOptions& options) {
  if (!(options.rate_hz > 0.0)) raise(ErrorKind::InvalidArgument, "stream rate must be > 0");
  Rng rng(options.seed);
  std::vector<TrackerFrame> frames;
  const double period = 1000.0 / options.rate_hz;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * period;
    if (t >= script.duration_ms) break;
    TrackerFrame frame;
    frame.timestamp_ms = t;
    const RigidTransform motion = interpolate(script.patient_motion, t);
    for (const auto& st : script.tools) {
      RigidTransform pose = pose_at(st, t);
      if (std::find(script.patient_side_tools.begin(), script.patient_side_tools.end(), st.tool.tool_id) !=
          script.patient_side_tools.end()) {
        pose = compose(motion, pose);
      }
      ToolObservation obs = observe_tool(st.tool, pose, options.noise, rng);
      const bool hidden = std::any_of(st.occlusions.begin(), st.occlusions.end(),
                                      [&](const TimeWindow& w) { return w.contains(t); });
      for (std::size_t i = 0; i < obs.markers.size(); ++i) {
        bool visible = !hidden;
        for (const auto& mo : st.marker_occlusions) {
          if (mo.marker == i && mo.window.contains(t)) visible = false;
        }
        obs.markers[i].visible = visible;
        if (!visible) obs.markers[i].position = Vec3::Zero();
      }
      frame.observations.push_back(std::move(obs));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

DynamicReference::DynamicReference(ToolDefinition drb) : drb_(std::move(drb)) { validate_tool(drb_); }

bool DynamicReference::update(const TrackerFrame& frame, double max_residual) {
  std::shared_ptr<const StampedPose> next;
  try {
    next = std::make_shared<const StampedPose>(estimate_tool_pose(frame, drb_, max_residual).body_to_tracker);
  } catch (const Error&) {
    next = nullptr;
  }
  std::lock_guard<std::mutex> lock(mutex_);
  latest_ = next;
  return latest_ != nullptr;
}

std::shared_ptr<const StampedPose> DynamicReference::latest() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return latest_;
}

std::optional<RigidTransform> navigate(const TrackerFrame& frame, const ToolDefinition& tool,
                                       const ToolDefinition& drb, double max_residual) {
  try {
    const auto drb_pose = estimate_tool_pose(frame, drb, max_residual);
    const auto tool_pose = estimate_tool_pose(frame, tool, max_residual);
    return patient_relative(tool_pose.body_to_tracker, drb_pose.body_to_tracker);
  } catch (const Error&) {
    return std::nullopt;
  }
}

ToolDefinition default_stylus() {
  return {"STYLUS",
          {Vec3(0, 0, 0), Vec3(40, 0, 0), Vec3(0, 55, 0), Vec3(-35, -25, 10)},
          Vec3(0, 0, 150)};
}

ToolDefinition default_drb() {
  return {"DRB", {Vec3(0, 0, 0), Vec3(88, 0, 0), Vec3(0, 104, 0), Vec3(52, 66, 24)}, std::nullopt};
}

ToolDefinition default_jig_markers() {
  return {"JIG", {Vec3(0, 0, 0), Vec3(106, 0, 0), Vec3(0, 124, 0), Vec3(68, 81, 30)}, std::nullopt};
}

}  // namespace igss
