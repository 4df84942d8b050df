#include "igss/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace igss {

namespace {

constexpr double kDriftTolerance = 1e-12;

double rotation_drift(const Mat3& r) {
  const Mat3 gram = r.transpose() * r - Mat3::Identity();
  return gram.cwiseAbs().maxCoeff() + std::abs(r.determinant() - 1.0);
}

}  // namespace

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (rotation_drift(rotation_) > kDriftTolerance) rotation_ = project_to_rotation(rotation_);
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle,
                                               const Vec3& translation) {
  return {Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(), translation};
}

RigidTransform RigidTransform::from_rotation_vector(const Vec3& omega, const Vec3& translation) {
  const double angle = omega.norm();
  if (angle < 1e-300) return from_translation(translation);
  return from_axis_angle(omega / angle, angle, translation);
}

RigidTransform RigidTransform::from_matrix(const Mat4& m) {
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

Mat4 RigidTransform::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return {rt, -(rt * translation_)};
}

double RigidTransform::orthonormality_error() const { return rotation_drift(rotation_); }

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

RigidTransform invert(const RigidTransform& t) { return t.inverse(); }

Mat3 rot_x(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix(); }
Mat3 rot_y(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix(); }
Mat3 rot_z(double angle) { return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix(); }

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Vec3 rotation_log(const Mat3& r) {
  const double cos_angle = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double sin_angle = 0.5 * skew.norm();
  const double angle = std::atan2(sin_angle, cos_angle);

  if (angle < 1e-8) return 0.5 * skew;  // first-order: skew = 2 sin(angle) axis
  if (kPi - angle > 1e-6) return skew * (angle / (2.0 * std::sin(angle)));

  // Near pi: R + I = 2 a aᵀ (+ O(pi - angle)), so any column is a multiple of
  // the axis; the largest-norm column is the best conditioned one.
  const Mat3 b = r + Mat3::Identity();
  Eigen::Index col = 0;
  b.colwise().norm().maxCoeff(&col);
  Vec3 axis = b.col(col).normalized();
  // Resolve the sign from the (tiny but informative) skew part when present.
  if (skew.dot(axis) < 0.0) axis = -axis;
  return axis * angle;
}

double rotation_angle_between(const Mat3& a, const Mat3& b) {
  return rotation_log(a.transpose() * b).norm();
}

PoseDelta pose_delta(const RigidTransform& a, const RigidTransform& b) {
  return {(a.translation() - b.translation()).norm(),
          rotation_angle_between(a.rotation(), b.rotation())};
}

Vec3 any_orthogonal(const Vec3& v) {
  const Vec3 n = v.normalized();
  const Vec3 ref = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(ref).normalized();
}

std::ostream& operator<<(std::ostream& os, const RigidTransform& t) {
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, ", ", "; ", "", "", "[", "]");
  return os << "R=" << t.rotation().format(fmt) << " t=" << t.translation().transpose().format(fmt);
}

}  // namespace igss
