// Simulated optical tracking: marker observations, tool pose estimation,
// pivot calibration and dynamic-reference (patient-relative) navigation.
#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "igss/geometry.hpp"
#include "igss/rng.hpp"

namespace igss {

struct ToolDefinition {
  std::string tool_id;
  std::vector<Vec3> markers;        // body frame, mm
  std::optional<Vec3> tip_offset;   // body frame; unknown until pivot-calibrated
};

// >= 3 non-collinear markers with pairwise distances distinct by > 0.5 mm.
void validate_tool(const ToolDefinition& tool);

struct MarkerObservation {
  Vec3 position = Vec3::Zero();  // tracker frame, mm
  bool visible = true;
};

struct ToolObservation {
  std::string tool_id;
  std::vector<MarkerObservation> markers;  // same order as the definition

  std::size_t visible_count() const;
};

struct TrackerFrame {
  double timestamp_ms = 0.0;
  std::vector<ToolObservation> observations;

  const ToolObservation* find(const std::string& tool_id) const;
};

struct StampedPose {
  RigidTransform pose;
  double timestamp_ms = 0.0;
};

struct PoseEstimate {
  StampedPose body_to_tracker;
  double residual_rms = 0.0;  // mm
  std::size_t n_markers = 0;
};

inline constexpr double kMaxToolResidualMm = 1.0;

// Fits the tool's body markers to the visible observations. Rejects fits
// whose residual RMS exceeds `max_residual` (occlusion / misidentification).
PoseEstimate estimate_tool_pose(const TrackerFrame& frame, const ToolDefinition& tool,
                                double max_residual = kMaxToolResidualMm);

struct PivotCalibration {
  Vec3 tip_offset = Vec3::Zero();   // body frame
  Vec3 pivot_point = Vec3::Zero();  // tracker frame
  double residual_rms = 0.0;        // mm
  double condition_ratio = 0.0;     // smallest / largest singular value
};

// Least squares over  R_i t - p = -t_i  for the tip offset t and the fixed
// pivot p, given >= 10 body->tracker poses pivoting about one point.
PivotCalibration pivot_calibrate(const std::vector<RigidTransform>& poses);

// Tool pose expressed in the DRB frame: invert(drb) * tool. Both poses must
// carry the same timestamp.
RigidTransform patient_relative(const StampedPose& tool_pose, const StampedPose& drb_pose);

// Tracker measurement noise: Gaussian, sigma_mm laterally and
// sigma_mm * depth_factor along the tracker's viewing (z) axis.
struct MarkerNoise {
  double sigma_mm = 0.0;
  double depth_factor = 1.0;
};

// Observed marker positions of `tool` placed at `body_to_tracker`.
ToolObservation observe_tool(const ToolDefinition& tool, const RigidTransform& body_to_tracker,
                             const MarkerNoise& noise, Rng& rng);

struct TimeWindow {
  double start_ms = 0.0;
  double end_ms = 0.0;  // exclusive
  bool contains(double t) const { return t >= start_ms && t < end_ms; }
};

struct PoseKeyframe {
  double t_ms = 0.0;
  RigidTransform pose;  // body -> tracker
};

struct MarkerOcclusion {
  std::size_t marker = 0;
  TimeWindow window;
};

struct ScriptedTool {
  ToolDefinition tool;
  std::vector<PoseKeyframe> trajectory;        // sorted by time; held constant outside
  std::vector<TimeWindow> occlusions;          // whole tool hidden
  std::vector<MarkerOcclusion> marker_occlusions;
};

// Piecewise interpolation of the scripted trajectory (linear translation,
// slerp rotation).
RigidTransform pose_at(const ScriptedTool& tool, double t_ms);

struct SceneScript {
  std::vector<ScriptedTool> tools;
  double duration_ms = 0.0;
  // Extra motion applied to the whole scene at time t (e.g. patient motion for
  // tools that are rigidly attached); identity when unset.
  std::vector<std::string> patient_side_tools;
  std::vector<PoseKeyframe> patient_motion;
};

struct StreamOptions {
  double rate_hz = 30.0;
  MarkerNoise noise;
  std::uint64_t seed = 0;
};

// Deterministic frame sequence: frame k is stamped k * 1000 / rate_hz ms,
// for every k with stamp < duration.
std::vector<TrackerFrame> simulate_stream(const SceneScript& script, const StreamOptions& options);

// Latest DRB pose for one session: single writer, many readers. The pose is
// cleared whenever the DRB cannot be tracked, so stale patient-relative
// poses are never served.
class DynamicReference {
 public:
  explicit DynamicReference(ToolDefinition drb);

  const ToolDefinition& definition() const { return drb_; }

  // Returns true when the DRB was tracked in `frame`.
  bool update(const TrackerFrame& frame, double max_residual = kMaxToolResidualMm);
  std::shared_ptr<const StampedPose> latest() const;

 private:
  ToolDefinition drb_;
  mutable std::mutex mutex_;
  std::shared_ptr<const StampedPose> latest_;
};

// Tool pose in the DRB frame for one tracker frame; nullopt when either the
// DRB or the tool cannot be tracked.
std::optional<RigidTransform> navigate(const TrackerFrame& frame, const ToolDefinition& tool,
                                       const ToolDefinition& drb, double max_residual = kMaxToolResidualMm);

// Default tool geometries used by the simulators.
ToolDefinition default_stylus();   // tip at (0, 0, 150) once calibrated
ToolDefinition default_drb();
ToolDefinition default_jig_markers();

// Line-oriented recording: "timestamp_ms tool_id marker x y z visible",
// six fractional digits.
std::string serialize_tracker_log(const std::vector<TrackerFrame>& frames);
std::vector<TrackerFrame> parse_tracker_log(const std::string& text);

}  // namespace igss
