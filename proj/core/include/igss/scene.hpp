// Simulated operating room shared by the study harness and the service:
// ground-truth poses of the patient image, tracker, DRB and robot base in a
// room frame (+z up, patient prone with cranial along +y).
#pragma once

#include <vector>

#include "igss/frame_graph.hpp"
#include "igss/geometry.hpp"
#include "igss/robot.hpp"
#include "igss/tracking.hpp"

namespace igss {

// camera -> world pose whose +z axis looks from `eye` toward `target`.
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up_hint = Vec3::UnitZ());

struct OperatingRoom {
  RigidTransform image_to_room;
  RigidTransform tracker_to_room;
  RigidTransform drb_to_room;
  RigidTransform robot_base_to_room;
  std::vector<Obstacle> obstacles;  // room frame
  ToolDefinition drb;
  ToolDefinition stylus;
  JointState robot_home = JointState::Zero();

  RigidTransform image_to_drb() const;
  RigidTransform drb_to_tracker() const;
  RigidTransform robot_base_to_tracker() const;
  RigidTransform room_to_tracker() const { return tracker_to_room.inverse(); }
  std::vector<Obstacle> obstacles_in_base() const;
  // CT_IMAGE -> DRB -> TRACKER <- ROBOT_BASE, all ground truth.
  FrameGraph truth() const;
  // Rigid motion (room frame) applied to everything fixed to the patient.
  OperatingRoom with_patient_motion(const RigidTransform& motion) const;
};

OperatingRoom default_operating_room();

Obstacle transformed(const Obstacle& o, const RigidTransform& t);

}  // namespace igss
