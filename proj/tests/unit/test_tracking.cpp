#include "support.hpp"

#include <cmath>

#include "igss/scene.hpp"
#include "igss/tracking.hpp"

using namespace igss;
using igss::test::check_raises;

namespace {

TrackerFrame frame_with(double t, std::initializer_list<ToolObservation> obs) {
  TrackerFrame f;
  f.timestamp_ms = t;
  f.observations = obs;
  return f;
}

}  // namespace

TEST_CASE("default tools satisfy the marker rules") {
  CHECK_NOTHROW(validate_tool(default_stylus()));
  CHECK_NOTHROW(validate_tool(default_drb()));
  CHECK_NOTHROW(validate_tool(default_jig_markers()));
  ToolDefinition line{"L", {Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(25, 0, 0)}, std::nullopt};
  check_raises(ErrorKind::InvalidArgument, [&] { validate_tool(line); });
  ToolDefinition symmetric{"S", {Vec3(0, 0, 0), Vec3(50, 0, 0), Vec3(0, 50, 0)}, std::nullopt};
  check_raises(ErrorKind::InvalidArgument, [&] { validate_tool(symmetric); });
}

TEST_CASE("tool pose estimation is exact without noise and tolerates one occluded marker") {
  Rng rng(test::kSeed);
  const ToolDefinition tool = default_drb();
  for (int i = 0; i < 100; ++i) {
    const RigidTransform pose = rng.rigid_transform(800.0);
    ToolObservation obs = observe_tool(tool, pose, {}, rng);
    auto est = estimate_tool_pose(frame_with(1.0, {obs}), tool);
    CHECK(test::near(est.body_to_tracker.pose, pose, 1e-9));
    CHECK(est.n_markers == 4);
    obs.markers[rng.index(4)].visible = false;
    est = estimate_tool_pose(frame_with(1.0, {obs}), tool);
    CHECK(test::near(est.body_to_tracker.pose, pose, 1e-9));
    CHECK(est.n_markers == 3);
    obs.markers[(rng.index(4))].visible = false;
    if (obs.visible_count() < 3) {
      check_raises(ErrorKind::InsufficientMarkers, [&] { (void)estimate_tool_pose(frame_with(1.0, {obs}), tool); });
    }
  }
  check_raises(ErrorKind::InsufficientMarkers, [&] { (void)estimate_tool_pose(frame_with(1.0, {}), tool); });
}

TEST_CASE("misplaced markers are caught by the residual gate") {
  Rng rng(test::kSeed + 1);
  const ToolDefinition tool = default_stylus();
  ToolObservation obs = observe_tool(tool, RigidTransform::identity(), {}, rng);
  obs.markers[1].position += Vec3(0.0, 0.0, 8.0);
  check_raises(ErrorKind::ResidualTooHigh, [&] { (void)estimate_tool_pose(frame_with(0.0, {obs}), tool); });
}

TEST_CASE("pivot calibration recovers the tip") {
  Rng rng(test::kSeed + 2);
  const Vec3 tip(1.5, -2.0, 151.0), pivot(30.0, -40.0, 1200.0);
  std::vector<RigidTransform> poses;
  for (int i = 0; i < 30; ++i) {
    const Mat3 r = RigidTransform::from_rotation_vector(rng.normal_vec3(0.35)).rotation() * rot_x(kPi);
    poses.emplace_back(r, pivot - r * tip);
  }
  const PivotCalibration cal = pivot_calibrate(poses);
  CHECK((cal.tip_offset - tip).norm() < 1e-8);
  CHECK((cal.pivot_point - pivot).norm() < 1e-8);
  CHECK(cal.residual_rms < 1e-8);

  check_raises(ErrorKind::InsufficientData, [&] { (void)pivot_calibrate({poses.begin(), poses.begin() + 9}); });
  std::vector<RigidTransform> frozen(12, poses.front());
  check_raises(ErrorKind::IllConditioned, [&] { (void)pivot_calibrate(frozen); });
}

TEST_CASE("patient-relative poses need matching timestamps") {
  const StampedPose tool{RigidTransform::from_translation(Vec3(1, 2, 3)), 10.0};
  const StampedPose drb{RigidTransform::from_translation(Vec3(1, 0, 0)), 10.0};
  CHECK((patient_relative(tool, drb).translation() - Vec3(0, 2, 3)).norm() < 1e-12);
  check_raises(ErrorKind::TimestampMismatch, [&] { (void)patient_relative(tool, {drb.pose, 11.0}); });
}

TEST_CASE("common rigid motion of DRB and anatomy leaves navigation unchanged") {
  Rng rng(test::kSeed + 3);
  const OperatingRoom room = default_operating_room();
  for (int i = 0; i < 200; ++i) {
    const RigidTransform tool_in_drb = rng.rigid_transform(150.0);
    const RigidTransform motion = rng.rigid_transform(100.0);
    const OperatingRoom moved = room.with_patient_motion(motion);
    auto nav = [&](const OperatingRoom& r) {
      const RigidTransform drb = r.drb_to_tracker();
      const TrackerFrame f = frame_with(0.0, {observe_tool(r.drb, drb, {}, rng),
                                              observe_tool(r.stylus, compose(drb, tool_in_drb), {}, rng)});
      return navigate(f, r.stylus, r.drb);
    };
    const auto a = nav(room), b = nav(moved);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(test::near(*a, *b, 1e-9));
    CHECK(test::near(room.image_to_drb(), moved.image_to_drb(), 1e-9));
  }
}

TEST_CASE("navigation is withheld while the DRB is hidden") {
  Rng rng(test::kSeed + 4);
  const OperatingRoom room = default_operating_room();
  const TrackerFrame f = frame_with(0.0, {observe_tool(room.stylus, RigidTransform::identity(), {}, rng)});
  CHECK_FALSE(navigate(f, room.stylus, room.drb));

  DynamicReference ref(room.drb);
  CHECK(ref.update(frame_with(1.0, {observe_tool(room.drb, room.drb_to_tracker(), {}, rng)})));
  REQUIRE(ref.latest());
  CHECK(ref.latest()->timestamp_ms == 1.0);
  CHECK_FALSE(ref.update(f));
  CHECK_FALSE(ref.latest());
}

TEST_CASE("scripted streams are deterministic and honour occlusions") {
  SceneScript script;
  script.duration_ms = 1000.0;
  ScriptedTool stylus{default_stylus(),
                      {{0.0, RigidTransform::from_translation(Vec3(0, 0, 1500))},
                       {1000.0, RigidTransform::from_axis_angle(Vec3::UnitX(), 0.5, Vec3(50, 0, 1400))}},
                      {{200.0, 400.0}},
                      {{2, {600.0, 700.0}}}};
  script.tools.push_back(stylus);
  const StreamOptions opt{30.0, {0.1, 3.0}, 99};
  const auto a = simulate_stream(script, opt), b = simulate_stream(script, opt);
  CHECK(a.size() == 30);
  CHECK(serialize_tracker_log(a) == serialize_tracker_log(b));
  for (const auto& f : a) {
    const ToolObservation* o = f.find("STYLUS");
    const bool hidden = f.timestamp_ms >= 200.0 && f.timestamp_ms < 400.0;
    if (hidden) {
      CHECK((o == nullptr || o->visible_count() == 0));
    } else {
      REQUIRE(o != nullptr);
      const bool marker_hidden = f.timestamp_ms >= 600.0 && f.timestamp_ms < 700.0;
      CHECK(o->visible_count() == (marker_hidden ? 3u : 4u));
    }
  }
  const auto c = simulate_stream(script, {30.0, {0.1, 3.0}, 100});
  CHECK(serialize_tracker_log(a) != serialize_tracker_log(c));
}

TEST_CASE("tracker log round trip") {
  Rng rng(test::kSeed + 5);
  std::vector<TrackerFrame> frames;
  for (int i = 0; i < 5; ++i) {
    TrackerFrame f = frame_with(i * 33.333333, {observe_tool(default_drb(), rng.rigid_transform(500.0), {0.2, 3.0}, rng)});
    f.observations.front().markers[1].visible = (i % 2) == 0;
    frames.push_back(f);
  }
  const std::string text = serialize_tracker_log(frames);
  const auto back = parse_tracker_log(text);
  CHECK(back.size() == frames.size());
  CHECK(serialize_tracker_log(back) == text);
  check_raises(ErrorKind::ParseError, [] { (void)parse_tracker_log("1.0 DRB 0 x y z 1\n"); });
}

TEST_CASE("pose interpolation between keyframes") {
  ScriptedTool t{default_stylus(),
                 {{0.0, RigidTransform::from_translation(Vec3(0, 0, 0))},
                  {100.0, RigidTransform::from_axis_angle(Vec3::UnitZ(), 1.0, Vec3(10, 0, 0))}},
                 {},
                 {}};
  const RigidTransform mid = pose_at(t, 50.0);
  CHECK((mid.translation() - Vec3(5, 0, 0)).norm() < 1e-12);
  CHECK(rotation_angle_between(mid.rotation(), Mat3::Identity()) == doctest::Approx(0.5));
  CHECK(test::near(pose_at(t, -5.0), t.trajectory.front().pose, 0.0));
  CHECK(test::near(pose_at(t, 500.0), t.trajectory.back().pose, 0.0));
}
