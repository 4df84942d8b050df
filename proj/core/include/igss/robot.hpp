// 6R serial arm: standard Denavit-Hartenberg kinematics, damped
// least-squares inverse kinematics, capsule collision queries, joint-space
// trajectory planning with retract-and-replan avoidance, and alignment of the
// tool guide to a planned screw axis.
#pragma once

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "igss/frame_graph.hpp"
#include "igss/geometry.hpp"
#include "igss/planning.hpp"

namespace igss {

using JointState = Eigen::Matrix<double, 6, 1>;  // rad

struct DhRow {
  double a = 0.0;             // mm
  double alpha = 0.0;         // rad
  double d = 0.0;             // mm
  double theta_offset = 0.0;  // rad
};

struct JointLimit {
  double min = -kPi;
  double max = kPi;
};

struct Capsule {
  Vec3 p0 = Vec3::Zero();
  Vec3 p1 = Vec3::Zero();
  double radius = 0.0;
};

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

using Obstacle = std::variant<Sphere, Capsule>;  // robot base frame

// Capsule rigidly attached to frame `link` (0 = base, i = after joint i,
// 7 = tool frame), given in that frame.
struct LinkCapsule {
  int link = 0;
  Capsule capsule;
};

struct ArmModel {
  std::array<DhRow, 6> dh{};
  std::array<JointLimit, 6> limits{};
  std::array<double, 6> max_velocity{};  // rad/s
  std::vector<LinkCapsule> capsules;
  RigidTransform tool;                   // flange -> tool (guide) frame

  void validate() const;
  // Upper bound on the distance from the base origin to the tool origin.
  double reach() const;
  bool within_limits(const JointState& q) const;
};

// Generic 6R arm (~850 mm reach) with a 120 mm tool guide.
ArmModel default_arm();

// Capsules running between consecutive DH frame origins, one per joint.
std::vector<LinkCapsule> segment_capsules(const std::array<DhRow, 6>& dh, const std::array<double, 6>& radii);

// base -> tool transform.
RigidTransform fk(const ArmModel& arm, const JointState& q);
// Frames 0..7: base, after each joint, tool.
std::array<RigidTransform, 8> link_frames(const ArmModel& arm, const JointState& q);
// 6x6 geometric Jacobian of the tool origin (rows: linear mm/rad, angular).
Eigen::Matrix<double, 6, 6> jacobian(const ArmModel& arm, const JointState& q);

struct IkOptions {
  int max_iterations = 400;
  double translation_tolerance = 1e-6;  // mm
  double rotation_tolerance = 1e-6;     // rad
  double initial_damping = 1e-2;
  int restarts = 8;
};

struct IkResult {
  JointState q = JointState::Zero();
  int iterations = 0;
  int attempt = 0;  // 0 = from the caller's seed
  double translation_error = 0.0;
  double rotation_error = 0.0;
};

IkResult ik_solve(const ArmModel& arm, const RigidTransform& target, const JointState& seed,
                  const IkOptions& options = {});
JointState ik(const ArmModel& arm, const RigidTransform& target, const JointState& seed,
              const IkOptions& options = {});

struct CollisionReport {
  bool colliding = false;
  double min_clearance = std::numeric_limits<double>::infinity();  // mm
  int link = -1;
  int obstacle = -1;
};

CollisionReport check_collision(const ArmModel& arm, const JointState& q, const std::vector<Obstacle>& obstacles);

// Closest distance between segments [p0, p1] and [q0, q1].
double segment_segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1);
double point_segment_distance(const Vec3& p, const Vec3& s0, const Vec3& s1);
// Signed clearance between two shapes (negative when overlapping).
double clearance(const Capsule& a, const Obstacle& b);

struct Trajectory {
  std::vector<JointState> waypoints;
  double dt = 0.0;  // s
  bool via_retract = false;
  double min_clearance = std::numeric_limits<double>::infinity();
};

struct PlanOptions {
  double retract_clearance = 100.0;  // mm above the highest obstacle
  std::size_t max_waypoints = 1'000'000;
};

// Joint-space cubic time scaling (zero boundary velocities) sized so no joint
// exceeds its velocity limit. Every waypoint is collision-checked; on a hit a
// single retract waypoint above all obstacles is inserted and the path
// re-planned. Never returns a colliding waypoint.
Trajectory plan_trajectory(const ArmModel& arm, const JointState& from, const JointState& to, double dt,
                           const std::vector<Obstacle>& obstacles = {}, const PlanOptions& options = {});

struct GuidePose {
  RigidTransform pose;  // robot base frame; +z is the guide bore
  Vec3 bore_axis = Vec3::UnitZ();
};

struct AlignOptions {
  double standoff = 50.0;  // mm from the entry point, back along the axis
  double dt = 0.02;        // s
  IkOptions ik;
  PlanOptions planning;
};

struct Alignment {
  GuidePose guide;
  JointState target = JointState::Zero();
  Trajectory trajectory;
};

// Maps the screw axis from CT image space into the robot base frame through
// `frames` (CT_IMAGE must connect to ROBOT_BASE), places the guide bore on it
// `standoff` mm before the entry, solves IK from `current` and plans the
// motion. RegistrationMissing when the chain is incomplete.
GuidePose guide_pose_for(const ScrewPlan& plan, const FrameGraph& frames, const RigidTransform& current_tool,
                         double standoff);
Alignment align_to_plan(const ScrewPlan& plan, const FrameGraph& frames, const ArmModel& arm,
                        const JointState& current, const std::vector<Obstacle>& obstacles = {},
                        const AlignOptions& options = {});

// "t q1 .. q6" per line, six fractional digits.
std::string export_trajectory(const Trajectory& trajectory);

// Arm description as JSON: {"schema_version": 1, "dh": [{"a", "alpha", "d",
// "theta_offset"} x6], "limits": [[min, max] x6], "max_velocity": [x6],
// "capsules": [{"link", "p0", "p1", "radius"}], "tool": {"rotation",
// "translation"}}. Lengths in mm, angles in rad.
std::string serialize_arm_config(const ArmModel& arm);
ArmModel parse_arm_config(const std::string& text);
ArmModel load_arm_config(const std::string& path);

}  // namespace igss
