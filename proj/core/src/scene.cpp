#include "igss/scene.hpp"

namespace igss {

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint) {
  const Vec3 z = (target - eye).normalized();
  Vec3 x = up_hint.cross(z);
  if (x.norm() < 1e-9) x = any_orthogonal(z);
  x.normalize();
  Mat3 r;
  r.col(0) = x;
  r.col(1) = z.cross(x);
  r.col(2) = z;
  return {r, eye};
}

RigidTransform OperatingRoom::image_to_drb() const { return compose(drb_to_room.inverse(), image_to_room); }

RigidTransform OperatingRoom::drb_to_tracker() const { return compose(room_to_tracker(), drb_to_room); }

RigidTransform OperatingRoom::robot_base_to_tracker() const { return compose(room_to_tracker(), robot_base_to_room); }

Obstacle transformed(const Obstacle& o, const RigidTransform& t) {
  if (const auto* s = std::get_if<Sphere>(&o)) return Sphere{t.apply(s->center), s->radius};
  const auto& c = std::get<Capsule>(o);
  return Capsule{t.apply(c.p0), t.apply(c.p1), c.radius};
}

std::vector<Obstacle> OperatingRoom::obstacles_in_base() const {
  const RigidTransform room_to_base = robot_base_to_room.inverse();
  std::vector<Obstacle> out;
  for (const auto& o : obstacles) out.push_back(transformed(o, room_to_base));
  return out;
}

FrameGraph OperatingRoom::truth() const {
  return FrameGraph{}
      .with_edge(frames::kCtImage, frames::kDrb, image_to_drb())
      .with_edge(frames::kDrb, frames::kTracker, drb_to_tracker())
      .with_edge(frames::kRobotBase, frames::kTracker, robot_base_to_tracker());
}

OperatingRoom OperatingRoom::with_patient_motion(const RigidTransform& motion) const {
  OperatingRoom out = *this;
  out.image_to_room = compose(motion, image_to_room);
  out.drb_to_room = compose(motion, drb_to_room);
  for (auto& o : out.obstacles) o = transformed(o, motion);
  return out;
}

OperatingRoom default_operating_room() {
  OperatingRoom room;
  Mat3 r;
  r.col(0) = Vec3::UnitX();
  r.col(1) = -Vec3::UnitZ();
  r.col(2) = Vec3::UnitY();
  room.image_to_room = RigidTransform(r, Vec3(0.0, 0.0, 1000.0));

  const Vec3 tracker_eye(0.0, -900.0, 2100.0);
  room.tracker_to_room = look_at(tracker_eye, Vec3(0.0, 100.0, 1000.0));

  const Vec3 drb_origin = room.image_to_room.apply(Vec3(0.0, -60.0, 140.0));
  room.drb_to_room = look_at(drb_origin, tracker_eye);

  room.robot_base_to_room = RigidTransform::from_translation(Vec3(420.0, 105.0, 880.0));
  room.obstacles.push_back(Capsule{Vec3(0.0, -400.0, 880.0), Vec3(0.0, 650.0, 880.0), 110.0});

  room.drb = default_drb();
  room.stylus = default_stylus();
  room.robot_home << 0.0, -2.0, 1.6, -1.17, -1.5708, 0.0;
  return room;
}

}  // namespace igss
