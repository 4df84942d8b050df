// Simulated 2D C-Arm fluoroscope: central projection, bead jig, automatic
// bead identification, jig-based pose calibration, and two-view
// patient-to-image registration.
//
// Camera frame: origin at the X-ray source, +z along the central ray toward
// the detector. A camera-frame point (x, y, z) lands on the detector at
// (f x / z, f y / z) mm from the principal point, f = source-detector distance.
#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "igss/frame_graph.hpp"
#include "igss/geometry.hpp"
#include "igss/registration.hpp"
#include "igss/rng.hpp"
#include "igss/tracking.hpp"

namespace igss {

struct CArmModel {
  double source_detector_distance = 1000.0;  // mm
  double pixel_pitch = 0.4;                  // mm / pixel
  int detector_width = 768;                  // pixels
  int detector_height = 768;
  double principal_u = 384.0;                // pixels
  double principal_v = 384.0;
  RigidTransform pose;                       // world -> camera

  double focal_pixels() const { return source_detector_distance / pixel_pitch; }
  bool inside_detector(double u, double v) const;
  void validate() const;
};

// Camera whose central ray passes through `isocenter` along `view_direction`
// (source -> detector), with the source `source_to_isocenter` mm away.
// `up_hint` fixes the roll; it must not be parallel to the view direction.
RigidTransform carm_pose_looking_at(const Vec3& isocenter, const Vec3& view_direction,
                                    double source_to_isocenter, const Vec3& up_hint);

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
};

// Central projection of world points. BehindSource when any point has
// camera depth <= 1 mm.
std::vector<PixelPoint> project(const CArmModel& carm, const std::vector<Vec3>& points_world);

// Ray through a detector pixel, in camera coordinates (origin at source).
Vec3 pixel_ray(const CArmModel& carm, double u, double v);

struct CalibrationJig {
  std::vector<Fiducial> beads;  // jig frame, mm
  ToolDefinition tracker_markers;

  std::vector<Vec3> bead_positions() const;
};

// Throws DegenerateBeads when the jig breaks its construction rules:
// >= 6 beads, some bead > 5 mm off the best-fit plane of the others, and
// pairwise bead distances distinct by > 1 mm.
void validate_jig(const CalibrationJig& jig);

// True when some point lies more than `min_offset` from the least-squares
// plane of the remaining points.
bool has_out_of_plane_point(const std::vector<Vec3>& points, double min_offset = 5.0);

// 8-bead jig with a 4-marker tracked body; satisfies validate_jig.
CalibrationJig default_jig();

enum class ViewTag { AP, LATERAL, OTHER };
std::string to_string(ViewTag tag);
ViewTag view_tag_from_string(const std::string& s);

struct Detection {
  std::string label;  // empty when unidentified
  double u = 0.0;
  double v = 0.0;
};

struct ProjectionImage {
  std::vector<Detection> detections;
  ViewTag view_tag = ViewTag::OTHER;
  std::uint64_t shot_index = 0;
  CArmModel carm;  // snapshot; serialization keeps intrinsics only
};

// Per-session exposure counter. Strictly increasing, never reset.
class ShotCounter {
 public:
  std::uint64_t next() { return ++count_; }
  std::uint64_t count() const { return count_.load(); }

 private:
  std::atomic<std::uint64_t> count_{0};
};

struct JigScene {
  const CalibrationJig* jig = nullptr;
  RigidTransform jig_to_world;
};

// Exposes one image: projects every visible bead (in front of the source and
// on the detector), adds isotropic Gaussian pixel noise, stamps the next shot
// index.
ProjectionImage acquire_shot(const JigScene& scene, const CArmModel& carm, double noise_px, Rng& rng,
                             ShotCounter& counter, ViewTag view = ViewTag::OTHER);

struct IdentifyOptions {
  double gate_px = 20.0;       // max detection-to-prediction distance
  double ambiguity_px = 2.0;   // min total-cost margin to the runner-up assignment
};

// Labels detections by nearest-neighbour matching against the beads
// projected under `carm_guess` (whose pose is jig -> camera), then rejects
// matches whose pairwise-distance signature disagrees with the prediction.
// Unmatched detections are dropped.
std::vector<Detection> identify_beads(const std::vector<PixelPoint>& detections, const CalibrationJig& jig,
                                      const CArmModel& carm_guess, const IdentifyOptions& options = {});

struct PoseCalibration {
  RigidTransform jig_to_camera;
  double residual_rms_px = 0.0;
  int iterations = 0;
  std::size_t n_beads = 0;
};

struct CalibrateOptions {
  int max_iterations = 100;
  double max_residual_px = 5.0;
};

// Pose of the jig in the camera frame from labeled bead detections with known
// intrinsics: direct linear solve, then damped Gauss-Newton on reprojection
// error.
PoseCalibration calibrate_pose(const ProjectionImage& image, const CalibrationJig& jig,
                               const CalibrateOptions& options = {});

// Midpoint of the common perpendicular of two rays (directions need not be
// unit). IllConditioned for (near-)parallel rays.
Vec3 triangulate_midpoint(const Vec3& origin_a, const Vec3& dir_a, const Vec3& origin_b, const Vec3& dir_b);

// One exposure together with the tracker state at the moment it was taken.
// `frames` must connect JIG and DRB (typically via TRACKER).
struct TrackedProjection {
  ProjectionImage image;
  FrameGraph frames;
};

struct TwoViewOptions {
  double min_view_separation_rad = deg_to_rad(30.0);
  CalibrateOptions calibration;
};

struct TwoViewRegistration {
  RegistrationResult registration;  // image (CARM_AP camera frame) -> DRB
  PoseCalibration ap_calibration;
  PoseCalibration lat_calibration;
  double view_separation_rad = 0.0;
  FiducialSet triangulated;         // beads in image space
  RigidTransform lat_to_image;      // lateral camera -> AP camera
};

// Automatic fiducial-based registration from an AP and a lateral exposure.
// Image space is the AP camera frame.
TwoViewRegistration register_patient_2d(const TrackedProjection& ap, const TrackedProjection& lat,
                                        const CalibrationJig& jig, const TwoViewOptions& options = {});

// Image-space position of a feature seen at `ap_px` / `lat_px` in the two
// exposures of `reg`.
Vec3 reconstruct_point(const TwoViewRegistration& reg, const CArmModel& ap, const CArmModel& lat,
                       const PixelPoint& ap_px, const PixelPoint& lat_px);

// Plain-text interchange (see README): six fractional digits, ties to even.
std::string serialize_projection(const ProjectionImage& image);
ProjectionImage parse_projection(const std::string& text);

}  // namespace igss
