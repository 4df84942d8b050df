// Rigid-motion primitives shared by every navigation module.
//
// Conventions (used throughout the library):
//   * lengths in millimeters, angles in radians;
//   * a RigidTransform maps points FROM its source frame TO its target frame;
//   * compose(a, b) applies b first, then a.
#pragma once

#include <Eigen/Dense>

#include <iosfwd>

namespace igss {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

class RigidTransform {
 public:
  RigidTransform() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  // Projects `rotation` onto SO(3) when it is not orthonormal to 1e-12.
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  static RigidTransform from_rotation(const Mat3& r) { return {r, Vec3::Zero()}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle,
                                        const Vec3& translation = Vec3::Zero());
  // Rotation vector (axis * angle).
  static RigidTransform from_rotation_vector(const Vec3& omega,
                                             const Vec3& translation = Vec3::Zero());
  static RigidTransform from_matrix(const Mat4& m);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 apply_direction(const Vec3& d) const { return rotation_ * d; }
  Mat4 matrix() const;

  RigidTransform inverse() const;

  // Max |RᵀR - I| entry plus |det R - 1|.
  double orthonormality_error() const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& t);

inline RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  return compose(a, b);
}

Mat3 rot_x(double angle);
Mat3 rot_y(double angle);
Mat3 rot_z(double angle);

// Nearest proper rotation in the Frobenius sense.
Mat3 project_to_rotation(const Mat3& m);

// Minimal-angle rotation vector of R. At an angle of exactly pi the axis is
// taken from the largest-norm column of (R + I), which is parallel to it.
Vec3 rotation_log(const Mat3& r);

// Geodesic angle between two rotations, in [0, pi].
double rotation_angle_between(const Mat3& a, const Mat3& b);

// Translation and rotation distance between two transforms.
struct PoseDelta {
  double translation_mm = 0.0;
  double rotation_rad = 0.0;
};
PoseDelta pose_delta(const RigidTransform& a, const RigidTransform& b);

// Any unit vector orthogonal to `v` (deterministic).
Vec3 any_orthogonal(const Vec3& v);

std::ostream& operator<<(std::ostream& os, const RigidTransform& t);

}  // namespace igss
