// Brute-force reference implementations used to check the analytic code.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "igss/planning.hpp"
#include "igss/robot.hpp"

namespace igss::oracle {

// Exterior distance to an ellipse by dense sampling of its boundary.
inline double ellipse_distance(double a, double b, double x, double y) {
  if ((x * x) / (a * a) + (y * y) / (b * b) <= 1.0) return 0.0;
  constexpr int kSamples = 20000;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kSamples; ++i) {
    const double t = 2.0 * kPi * i / kSamples;
    best = std::min(best, std::hypot(x - a * std::cos(t), y - b * std::sin(t)));
  }
  return best;
}

// Deepest point of the screw surface outside the pedicle, sampled over the
// swept cylinder along the traversal interval.
inline double breach_depth(const ScrewPlan& plan, const VertebraModel& v) {
  const EllipticCylinder& ped = v.pedicle(plan.side);
  Interval iv = pedicle_traversal(plan, ped);
  if (iv.empty()) iv = {0.0, plan.length};
  const Vec3 u = any_orthogonal(plan.direction), w = plan.direction.cross(u);
  const double r = 0.5 * plan.diameter;
  double best = 0.0;
  constexpr int kAxial = 41, kAround = 1440;
  for (int i = 0; i < kAxial; ++i) {
    const double s = iv.lo + (iv.hi - iv.lo) * i / (kAxial - 1);
    const Vec3 c = plan.entry + s * plan.direction;
    for (int k = 0; k < kAround; ++k) {
      const double phi = 2.0 * kPi * k / kAround;
      best = std::max(best, elliptic_cylinder_exterior_distance(ped, c + r * (std::cos(phi) * u + std::sin(phi) * w)));
    }
  }
  return best;
}

// Segment distance by sampling one segment against the exact point-segment
// distance to the other.
inline double segment_distance(const Vec3& p0, const Vec3& p1, const Vec3& q0, const Vec3& q1) {
  constexpr int kSamples = 2000;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kSamples; ++i) {
    const Vec3 p = p0 + (p1 - p0) * (static_cast<double>(i) / kSamples);
    best = std::min(best, point_segment_distance(p, q0, q1));
  }
  return best;
}

inline double arm_clearance(const ArmModel& arm, const JointState& q, const std::vector<Obstacle>& obstacles) {
  const auto frames = link_frames(arm, q);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& lc : arm.capsules) {
    const auto& f = frames[static_cast<std::size_t>(lc.link)];
    const Vec3 a0 = f.apply(lc.capsule.p0), a1 = f.apply(lc.capsule.p1);
    for (const auto& o : obstacles) {
      double c;
      if (const auto* s = std::get_if<Sphere>(&o)) {
        c = segment_distance(a0, a1, s->center, s->center) - s->radius;
      } else {
        const auto& k = std::get<Capsule>(o);
        c = segment_distance(a0, a1, k.p0, k.p1) - k.radius;
      }
      best = std::min(best, c - lc.capsule.radius);
    }
  }
  return best;
}

// Spheres and capsules scattered around the arm's frame origins so that
// roughly half of the scenes collide.
inline std::vector<Obstacle> obstacles_near_arm(const ArmModel& arm, const JointState& q, Rng& rng) {
  const auto frames = link_frames(arm, q);
  std::vector<Obstacle> out;
  const int n = 1 + static_cast<int>(rng.index(3));
  for (int i = 0; i < n; ++i) {
    const Vec3 anchor = frames[1 + rng.index(7)].translation() + rng.normal_vec3(80.0);
    if (rng.uniform() < 0.5) {
      out.emplace_back(Sphere{anchor, rng.uniform(10.0, 60.0)});
    } else {
      const Vec3 half = rng.unit_vector() * rng.uniform(20.0, 150.0);
      out.emplace_back(Capsule{anchor - half, anchor + half, rng.uniform(5.0, 40.0)});
    }
  }
  return out;
}

// Plan perturbed around the pedicle axis; a mix of contained and breaching
// screws.
inline ScrewPlan perturbed_plan(const VertebraModel& v, Rng& rng) {
  const Side side = rng.uniform() < 0.5 ? Side::Left : Side::Right;
  ScrewPlan p = axial_plan(v, side, rng.uniform(30.0, 50.0), rng.uniform(3.5, 7.5));
  p.entry += rng.normal_vec3(2.0);
  p.direction = (p.direction + rng.normal_vec3(0.12)).normalized();
  return p;
}

inline JointState random_joints(Rng& rng, double span = kPi) {
  JointState q;
  for (int i = 0; i < 6; ++i) q(i) = rng.uniform(-span, span);
  return q;
}

}  // namespace igss::oracle
