#include "igss/robot.hpp"

#include <algorithm>
#include <cmath>

#include "igss/decimal.hpp"
#include "igss/error.hpp"

namespace igss {

namespace {

RigidTransform dh_transform(const DhRow& row, double theta) {
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(row.alpha), sa = std::sin(row.alpha);
  Mat3 r;
  r << ct, -st * ca, st * sa,
       st, ct * ca, -ct * sa,
       0.0, sa, ca;
  return {r, Vec3(row.a * ct, row.a * st, row.d)};
}

}  // namespace

void ArmModel::validate() const {
  for (std::size_t i = 0; i < 6; ++i) {
    if (!(limits[i].min < limits[i].max)) raise(ErrorKind::InvalidArgument, "joint limit min >= max");
    if (!(max_velocity[i] > 0.0)) raise(ErrorKind::InvalidArgument, "max joint velocity must be > 0");
  }
  for (const auto& c : capsules) {
    if (!(c.capsule.radius > 0.0)) raise(ErrorKind::InvalidArgument, "capsule radius must be > 0");
    if (c.link < 0 || c.link > 7) raise(ErrorKind::InvalidArgument, "capsule link index out of range");
  }
}

double ArmModel::reach() const {
  double r = tool.translation().norm();
  for (const auto& row : dh) r += std::abs(row.a) + std::abs(row.d);
  return r;
}

bool ArmModel::within_limits(const JointState& q) const {
  for (int i = 0; i < 6; ++i) {
    if (q(i) < limits[i].min || q(i) > limits[i].max) return false;
  }
  return true;
}

std::vector<LinkCapsule> segment_capsules(const std::array<DhRow, 6>& dh, const std::array<double, 6>& radii) {
  std::vector<LinkCapsule> out;
  for (int i = 0; i < 6; ++i) {
    // Origin of frame i-1 seen from frame i; independent of the joint angle.
    const Vec3 prev = dh_transform(dh[i], dh[i].theta_offset).inverse().translation();
    out.push_back({i + 1, {prev, Vec3::Zero(), radii[i]}});
  }
  return out;
}

ArmModel default_arm() {
  ArmModel arm;
  arm.dh = {{{0.0, kPi / 2, 89.159, 0.0},
             {-425.0, 0.0, 0.0, 0.0},
             {-392.25, 0.0, 0.0, 0.0},
             {0.0, kPi / 2, 109.15, 0.0},
             {0.0, -kPi / 2, 94.65, 0.0},
             {0.0, 0.0, 82.3, 0.0}}};
  for (auto& l : arm.limits) l = {-2.0 * kPi, 2.0 * kPi};
  arm.limits[2] = {-kPi, kPi};
  arm.max_velocity = {kPi, kPi, kPi, 2.0 * kPi, 2.0 * kPi, 2.0 * kPi};
  arm.capsules = segment_capsules(arm.dh, {60.0, 55.0, 45.0, 40.0, 40.0, 35.0});
  arm.tool = RigidTransform::from_translation(Vec3(0.0, 0.0, 120.0));
  arm.capsules.push_back({7, {Vec3(0.0, 0.0, -120.0), Vec3(0.0, 0.0, -10.0), 12.0}});
  return arm;
}

std::array<RigidTransform, 8> link_frames(const ArmModel& arm, const JointState& q) {
  std::array<RigidTransform, 8> out;
  out[0] = RigidTransform::identity();
  for (int i = 0; i < 6; ++i) out[i + 1] = compose(out[i], dh_transform(arm.dh[i], q(i) + arm.dh[i].theta_offset));
  out[7] = compose(out[6], arm.tool);
  return out;
}

RigidTransform fk(const ArmModel& arm, const JointState& q) { return link_frames(arm, q)[7]; }

Eigen::Matrix<double, 6, 6> jacobian(const ArmModel& arm, const JointState& q) {
  const auto frames = link_frames(arm, q);
  const Vec3 pe = frames[7].translation();
  Eigen::Matrix<double, 6, 6> j;
  for (int i = 0; i < 6; ++i) {
    const Vec3 z = frames[i].rotation().col(2);
    const Vec3 o = frames[i].translation();
    j.block<3, 1>(0, i) = z.cross(pe - o);
    j.block<3, 1>(3, i) = z;
  }
  return j;
}

namespace {

constexpr double kRotationWeight = 100.0;  // mm per rad when mixing error terms

Eigen::Matrix<double, 6, 1> pose_error(const RigidTransform& current, const RigidTransform& target) {
  Eigen::Matrix<double, 6, 1> e;
  e.head<3>() = target.translation() - current.translation();
  e.tail<3>() = rotation_log(target.rotation() * current.rotation().transpose());
  return e;
}

double weighted_norm(const Eigen::Matrix<double, 6, 1>& e) {
  return std::sqrt(e.head<3>().squaredNorm() + kRotationWeight * kRotationWeight * e.tail<3>().squaredNorm());
}

JointState clamp_to_limits(const ArmModel& arm, JointState q) {
  for (int i = 0; i < 6; ++i) q(i) = std::clamp(q(i), arm.limits[i].min, arm.limits[i].max);
  return q;
}

// Shifts each angle by multiples of 2 pi toward the joint range.
JointState wrap_into_limits(const ArmModel& arm, JointState q) {
  for (int i = 0; i < 6; ++i) {
    while (q(i) > arm.limits[i].max && q(i) - 2.0 * kPi >= arm.limits[i].min) q(i) -= 2.0 * kPi;
    while (q(i) < arm.limits[i].min && q(i) + 2.0 * kPi <= arm.limits[i].max) q(i) += 2.0 * kPi;
  }
  return q;
}

struct Attempt {
  bool converged = false;
  JointState q;
  int iterations = 0;
  double et = 0.0, er = 0.0;
};

Attempt solve_from(const ArmModel& arm, const RigidTransform& target, const JointState& seed,
                   const IkOptions& opt) {
  Attempt a;
  a.q = clamp_to_limits(arm, seed);
  auto e = pose_error(fk(arm, a.q), target);
  double lambda = opt.initial_damping;
  Eigen::Matrix<double, 6, 6> w = Eigen::Matrix<double, 6, 6>::Identity();
  w.bottomRightCorner<3, 3>() *= kRotationWeight;
  for (; a.iterations < opt.max_iterations; ++a.iterations) {
    a.et = e.head<3>().norm();
    a.er = e.tail<3>().norm();
    if (a.et < opt.translation_tolerance && a.er < opt.rotation_tolerance) {
      a.converged = true;
      return a;
    }
    const Eigen::Matrix<double, 6, 6> j = w * jacobian(arm, a.q);
    const Eigen::Matrix<double, 6, 1> ew = w * e;
    const Eigen::Matrix<double, 6, 6> jjt = j * j.transpose() + lambda * lambda * Eigen::Matrix<double, 6, 6>::Identity();
    const JointState dq = j.transpose() * jjt.ldlt().solve(ew);
    const JointState cand = clamp_to_limits(arm, a.q + dq);
    const auto ec = pose_error(fk(arm, cand), target);
    if (weighted_norm(ec) < weighted_norm(e)) {
      a.q = cand;
      e = ec;
      lambda = std::max(lambda / 3.0, 1e-9);
    } else {
      lambda *= 10.0;
      if (lambda > 1e8) break;
    }
  }
  a.et = e.head<3>().norm();
  a.er = e.tail<3>().norm();
  a.converged = a.et < opt.translation_tolerance && a.er < opt.rotation_tolerance;
  return a;
}

const std::array<JointState, 8>& restart_offsets() {
  static const std::array<JointState, 8> offsets = [] {
    std::array<JointState, 8> o;
    const double h = kPi / 2;
    o[0] << h, 0, 0, 0, 0, 0;
    o[1] << -h, 0, 0, 0, 0, 0;
    o[2] << 0, h / 2, -h, 0, 0, 0;
    o[3] << 0, -h / 2, h, 0, 0, 0;
    o[4] << 0, 0, 0, h, h, 0;
    o[5] << 0, 0, 0, -h, -h, 0;
    o[6] << kPi, 0, 0, 0, 0, 0;
    o[7] << 0, h, h, 0, kPi / 3, 0;
    return o;
  }();
  return offsets;
}

}  // namespace

IkResult ik_solve(const ArmModel& arm, const RigidTransform& target, const JointState& seed, const IkOptions& options) {
  if (!arm.within_limits(seed)) raise(ErrorKind::LimitViolation, "IK seed outside joint limits");
  if (target.translation().norm() > arm.reach()) {
    raise(ErrorKind::Unreachable, "target " + std::to_string(target.translation().norm()) +
                                      " mm from base exceeds reach " + std::to_string(arm.reach()) + " mm");
  }
  bool converged_outside = false;
  const int attempts = 1 + std::clamp(options.restarts, 0, 8);
  for (int k = 0; k < attempts; ++k) {
    const JointState start = k == 0 ? seed : JointState(seed + restart_offsets()[k - 1]);
    const Attempt a = solve_from(arm, target, start, options);
    if (!a.converged) continue;
    const JointState q = wrap_into_limits(arm, a.q);
    if (!arm.within_limits(q)) {
      converged_outside = true;
      continue;
    }
    return {q, a.iterations, k, a.et, a.er};
  }
  if (converged_outside) raise(ErrorKind::LimitViolation, "IK converged only outside joint limits");
  raise(ErrorKind::Unreachable, "IK did not converge from the seed or any restart");
}

JointState ik(const ArmModel& arm, const RigidTransform& target, const JointState& seed, const IkOptions& options) {
  return ik_solve(arm, target, seed, options).q;
}

double point_segment_distance(const Vec3& p, const Vec3& s0, const Vec3& s1) {
  const Vec3 d = s1 - s0;
  const double len2 = d.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - s0).dot(d) / len2, 0.0, 1.0) : 0.0;
  return (p - (s0 + t * d)).norm();
}

double segment_segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  // Closest points of two segments (Ericson, Real-Time Collision Detection 5.1.9).
  const Vec3 d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  constexpr double eps = 1e-12;
  double s = 0.0, t = 0.0;
  if (a <= eps && e <= eps) return r.norm();
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > eps * a * e ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

double clearance(const Capsule& a, const Obstacle& b) {
  if (const auto* s = std::get_if<Sphere>(&b)) {
    return point_segment_distance(s->center, a.p0, a.p1) - a.radius - s->radius;
  }
  const auto& c = std::get<Capsule>(b);
  return segment_segment_distance(a.p0, a.p1, c.p0, c.p1) - a.radius - c.radius;
}

CollisionReport check_collision(const ArmModel& arm, const JointState& q, const std::vector<Obstacle>& obstacles) {
  CollisionReport rep;
  if (obstacles.empty()) return rep;
  const auto frames = link_frames(arm, q);
  for (const auto& lc : arm.capsules) {
    const auto& f = frames[static_cast<std::size_t>(lc.link)];
    const Capsule world{f.apply(lc.capsule.p0), f.apply(lc.capsule.p1), lc.capsule.radius};
    for (std::size_t k = 0; k < obstacles.size(); ++k) {
      const double c = clearance(world, obstacles[k]);
      if (c < rep.min_clearance) {
        rep.min_clearance = c;
        rep.link = lc.link;
        rep.obstacle = static_cast<int>(k);
      }
    }
  }
  rep.colliding = rep.min_clearance < 0.0;
  return rep;
}

namespace {

// Cubic segment; appends waypoints after `from` (exclusive) through `to`.
void append_segment(const ArmModel& arm, const JointState& from, const JointState& to, double dt,
                    std::size_t max_waypoints, std::vector<JointState>& out) {
  const JointState delta = to - from;
  double duration = 0.0;
  for (int i = 0; i < 6; ++i) duration = std::max(duration, 1.5 * std::abs(delta(i)) / arm.max_velocity[i]);
  if (duration == 0.0) return;
  const double steps_real = std::ceil(duration / dt);
  if (!(steps_real < static_cast<double>(max_waypoints))) {
    raise(ErrorKind::VelocityInfeasible, "motion needs more than " + std::to_string(max_waypoints) + " waypoints");
  }
  const auto steps = static_cast<std::size_t>(steps_real);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double tau = static_cast<double>(k) / static_cast<double>(steps);
    const double s = tau * tau * (3.0 - 2.0 * tau);
    out.push_back(k == steps ? to : JointState(from + s * delta));
  }
}

std::optional<double> path_clearance(const ArmModel& arm, const std::vector<JointState>& path,
                                     const std::vector<Obstacle>& obstacles) {
  double min_c = std::numeric_limits<double>::infinity();
  for (const auto& q : path) {
    const auto rep = check_collision(arm, q, obstacles);
    if (rep.colliding) return std::nullopt;
    min_c = std::min(min_c, rep.min_clearance);
  }
  return min_c;
}

double obstacle_top(const Obstacle& o) {
  if (const auto* s = std::get_if<Sphere>(&o)) return s->center.z() + s->radius;
  const auto& c = std::get<Capsule>(o);
  return std::max(c.p0.z(), c.p1.z()) + c.radius;
}

}  // namespace

Trajectory plan_trajectory(const ArmModel& arm, const JointState& from, const JointState& to, double dt,
                           const std::vector<Obstacle>& obstacles, const PlanOptions& options) {
  if (!(dt > 0.0) || !std::isfinite(dt)) raise(ErrorKind::VelocityInfeasible, "time step must be > 0");
  if (!arm.within_limits(from) || !arm.within_limits(to)) {
    raise(ErrorKind::LimitViolation, "trajectory endpoint outside joint limits");
  }
  if (check_collision(arm, from, obstacles).colliding || check_collision(arm, to, obstacles).colliding) {
    raise(ErrorKind::CollisionOnPath, "trajectory endpoint in collision");
  }

  Trajectory traj;
  traj.dt = dt;
  traj.waypoints.push_back(from);
  append_segment(arm, from, to, dt, options.max_waypoints, traj.waypoints);
  if (const auto c = path_clearance(arm, traj.waypoints, obstacles)) {
    traj.min_clearance = *c;
    return traj;
  }

  // Retract: lift the tool straight up above every obstacle, then descend.
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& o : obstacles) top = std::max(top, obstacle_top(o));
  const RigidTransform start = fk(arm, from);
  Vec3 lifted = start.translation();
  lifted.z() = std::max(lifted.z(), top + options.retract_clearance);
  JointState retract;
  try {
    retract = ik(arm, RigidTransform(start.rotation(), lifted), from);
  } catch (const Error& e) {
    raise(ErrorKind::CollisionOnPath, std::string("straight path collides and retract pose unreachable: ") + e.what());
  }
  Trajectory via;
  via.dt = dt;
  via.via_retract = true;
  via.waypoints.push_back(from);
  append_segment(arm, from, retract, dt, options.max_waypoints, via.waypoints);
  append_segment(arm, retract, to, dt, options.max_waypoints, via.waypoints);
  if (const auto c = path_clearance(arm, via.waypoints, obstacles)) {
    via.min_clearance = *c;
    return via;
  }
  raise(ErrorKind::CollisionOnPath, "no collision-free path, including via the retract waypoint");
}

GuidePose guide_pose_for(const ScrewPlan& plan, const FrameGraph& frames, const RigidTransform& current_tool,
                         double standoff) {
  RigidTransform image_to_base;
  try {
    image_to_base = frames.resolve(frames::kCtImage, frames::kRobotBase);
  } catch (const Error&) {
    raise(ErrorKind::RegistrationMissing, "no transform chain from CT_IMAGE to ROBOT_BASE");
  }
  const Vec3 entry = image_to_base.apply(plan.entry);
  const Vec3 z = image_to_base.apply_direction(plan.direction).normalized();
  // Keep the roll about the bore close to the current tool orientation.
  Vec3 x = current_tool.rotation().col(0);
  x -= x.dot(z) * z;
  x = x.norm() > 1e-6 ? x.normalized() : any_orthogonal(z);
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return {RigidTransform(r, entry - standoff * z), z};
}

Alignment align_to_plan(const ScrewPlan& plan, const FrameGraph& frames, const ArmModel& arm,
                        const JointState& current, const std::vector<Obstacle>& obstacles,
                        const AlignOptions& options) {
  validate_plan(plan);
  Alignment out;
  out.guide = guide_pose_for(plan, frames, fk(arm, current), options.standoff);
  out.target = ik(arm, out.guide.pose, current, options.ik);
  out.trajectory = plan_trajectory(arm, current, out.target, options.dt, obstacles, options.planning);
  return out;
}

std::string export_trajectory(const Trajectory& trajectory) {
  std::string out = "# t_s q1 q2 q3 q4 q5 q6 (rad)\n";
  for (std::size_t k = 0; k < trajectory.waypoints.size(); ++k) {
    out += format_fixed6(static_cast<double>(k) * trajectory.dt);
    for (int i = 0; i < 6; ++i) out += ' ' + format_fixed6(trajectory.waypoints[k](i));
    out += '\n';
  }
  return out;
}

}  // namespace igss
