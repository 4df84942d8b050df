// Parametric vertebra geometry, pedicle screw plans, breach measurement and
// Gertzbein-Robbins grading.
//
// Vertebra-local axes: +x toward the patient's left, +y anterior, +z cranial.
// Every model lives in CT image space (frame CT_IMAGE), levels stacked in z.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "igss/geometry.hpp"
#include "igss/rng.hpp"

namespace igss {

enum class Side { Left, Right };
std::string to_string(Side side);
Side side_from_string(const std::string& s);

// Finite elliptic cylinder: semi-axis `a` along `width_dir`, `b` along
// axis x width_dir, extending length/2 either side of `center` along `axis`.
struct EllipticCylinder {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitY();
  Vec3 width_dir = Vec3::UnitX();
  double a = 0.0;
  double b = 0.0;
  double length = 0.0;

  Vec3 height_dir() const { return axis.cross(width_dir); }
  // Posterior end of the axis (where a screw enters).
  Vec3 entry_point() const { return center - 0.5 * length * axis; }
};

struct BodyCylinder {
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  double radius = 0.0;
  double height = 0.0;
};

struct Plane {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();  // outward
};

struct VertebraModel {
  std::string level;
  EllipticCylinder left_pedicle;
  EllipticCylinder right_pedicle;
  BodyCylinder body;
  Plane anterior_cortex;

  const EllipticCylinder& pedicle(Side side) const { return side == Side::Left ? left_pedicle : right_pedicle; }
};

struct ScrewPlan {
  std::string level;
  Side side = Side::Left;
  Vec3 entry = Vec3::Zero();         // mm
  Vec3 direction = Vec3::UnitY();    // unit
  double length = 45.0;              // mm, [20, 60]
  double diameter = 6.5;             // mm, [3.5, 8.5]

  Vec3 tip() const { return entry + length * direction; }
};

// InvalidArgument on out-of-range length/diameter or a non-unit direction.
void validate_plan(const ScrewPlan& plan);

enum class Grade { A, B, C, D, E };
std::string to_string(Grade g);
Grade grade_from_string(const std::string& s);

struct BreachReport {
  double max_breach_depth = 0.0;   // mm, 0 when contained
  double breach_param = 0.0;       // mm along the screw axis from the entry
  double breach_angle = 0.0;       // rad about the screw axis (see validate_trajectory)
  bool anterior_perforation = false;
  Grade grade = Grade::A;
};

// A: no breach; B: < 2 mm; C: < 4 mm; D: < 6 mm; E: >= 6 mm or anterior
// perforation.
Grade grade_gertzbein(double depth, bool anterior_perforation);

// Euclidean distance from (x, y) to the ellipse x^2/a^2 + y^2/b^2 = 1 when the
// point is outside it, 0 inside. Root-finding on the normal parameter.
double ellipse_exterior_distance(double a, double b, double x, double y);

// Exterior distance of a 3D point to the infinite extension of `cyl`.
double elliptic_cylinder_exterior_distance(const EllipticCylinder& cyl, const Vec3& p);

// Axis-parameter interval [lo, hi] (mm from the entry) over which the screw
// axis lies inside the pedicle's axial extent. Empty (lo > hi) when the screw
// never enters it.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return lo > hi; }
};
Interval pedicle_traversal(const ScrewPlan& plan, const EllipticCylinder& pedicle);

// Maximum penetration of the screw surface outside the pedicle wall over the
// pedicle traversal, plus anterior perforation of the screw tip. The angle is
// measured about the screw axis from the component of the pedicle width
// direction orthogonal to it. SideMismatch when the plan names another level.
BreachReport validate_trajectory(const ScrewPlan& plan, const VertebraModel& vertebra);

struct ExecutionError {
  double translation_sigma = 0.0;  // mm per axis
  double rotation_sigma = 0.0;     // rad per axis of the rotation vector
};

ScrewPlan simulate_execution(const ScrewPlan& plan, const ExecutionError& error, Rng& rng);
ScrewPlan simulate_execution(const ScrewPlan& plan, const ExecutionError& error, std::uint64_t seed);

struct LevelGeometry {
  double pedicle_a = 5.0;          // mm, mediolateral semi-axis
  double pedicle_b = 7.0;          // mm, craniocaudal semi-axis
  double pedicle_length = 18.0;    // mm
  double medial_angle = deg_to_rad(15.0);
  double body_radius = 22.0;       // mm
  double body_height = 27.0;       // mm
  double level_spacing = 35.0;     // mm to the next level cranially
};

// Per-level geometry table; the defaults are configuration, not clinical data.
std::map<std::string, LevelGeometry> default_level_table();

// Levels ordered caudal to cranial: S1, L5..L1, T12..T1.
const std::vector<std::string>& known_levels();

std::vector<VertebraModel> build_default_spine(const std::vector<std::string>& levels);
std::vector<VertebraModel> build_spine(const std::vector<std::string>& levels,
                                       const std::map<std::string, LevelGeometry>& table);

// Screw along the pedicle axis starting at its posterior end.
ScrewPlan axial_plan(const VertebraModel& vertebra, Side side, double length, double diameter);

// Reflection across the sagittal plane (x -> -x), swapping sides.
VertebraModel mirror(const VertebraModel& v);
ScrewPlan mirror(const ScrewPlan& p);

// JSON documents carrying "schema_version": 1. A plan is
// {"level", "side", "entry": [x, y, z], "direction": [x, y, z], "length",
// "diameter"}; a report embeds the plan next to "max_breach_depth",
// "breach_location": {"param", "angle"}, "anterior_perforation", "grade".
std::string serialize_plan(const ScrewPlan& plan);
ScrewPlan parse_plan(const std::string& text);
std::string serialize_breach_report(const ScrewPlan& plan, const BreachReport& report);
BreachReport parse_breach_report(const std::string& text);

}  // namespace igss
