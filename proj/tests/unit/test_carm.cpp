#include "support.hpp"

#include <algorithm>
#include <cmath>

#include "igss/carm.hpp"
#include "igss/scene.hpp"

using namespace igss;
using igss::test::check_raises;

namespace {

CArmModel carm_at(const Vec3& iso, const Vec3& view, const Vec3& up, double source_to_iso = 650.0) {
  CArmModel c;
  c.pose = carm_pose_looking_at(iso, view, source_to_iso, up);
  return c;
}

struct TwoViewFixture {
  OperatingRoom room = default_operating_room();
  CalibrationJig jig = default_jig();
  RigidTransform jig_to_room = RigidTransform::from_translation(Vec3(0.0, 0.0, 1060.0));
  ShotCounter counter;

  TrackedProjection shot(const Vec3& view, const Vec3& up, ViewTag tag, double noise_px, Rng& rng) {
    TrackedProjection tp;
    tp.image = acquire_shot({&jig, jig_to_room}, carm_at(jig_to_room.translation(), view, up), noise_px, rng, counter,
                            tag);
    tp.frames = FrameGraph{}
                    .with_edge(frames::kJig, frames::kTracker, compose(room.room_to_tracker(), jig_to_room))
                    .with_edge(frames::kDrb, frames::kTracker, room.drb_to_tracker());
    return tp;
  }
};

}  // namespace

TEST_CASE("central ray lands on the principal point") {
  const CArmModel c = carm_at(Vec3(10, 20, 30), Vec3(0, 0, 1), Vec3::UnitY());
  const auto px = project(c, {Vec3(10, 20, 30), Vec3(10, 20, 100)});
  for (const auto& p : px) {
    CHECK(p.u == doctest::Approx(c.principal_u));
    CHECK(p.v == doctest::Approx(c.principal_v));
  }
}

TEST_CASE("pixel rays invert the projection") {
  Rng rng(test::kSeed);
  const CArmModel c = carm_at(Vec3::Zero(), Vec3(0.3, -0.2, 1.0).normalized(), Vec3::UnitY());
  for (int i = 0; i < 200; ++i) {
    const Vec3 world = rng.normal_vec3(60.0);
    const auto px = project(c, {world}).front();
    const Vec3 cam = c.pose.apply(world);
    CHECK(pixel_ray(c, px.u, px.v).normalized().cross(cam.normalized()).norm() < 1e-12);
  }
}

TEST_CASE("points behind the source are rejected") {
  const CArmModel c = carm_at(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitY());
  check_raises(ErrorKind::BehindSource, [&] { (void)project(c, {Vec3(0, 0, -700.0)}); });
}

TEST_CASE("jig construction rules") {
  CHECK_NOTHROW(validate_jig(default_jig()));
  CalibrationJig flat = default_jig();
  for (auto& b : flat.beads) b.position.z() = 0.0;
  check_raises(ErrorKind::DegenerateBeads, [&] { validate_jig(flat); });
  CalibrationJig few = default_jig();
  few.beads.resize(5);
  check_raises(ErrorKind::DegenerateBeads, [&] { validate_jig(few); });
}

TEST_CASE("noiseless pose calibration recovers the jig pose") {
  const CalibrationJig jig = default_jig();
  Rng rng(test::kSeed + 1);
  ShotCounter counter;
  for (int i = 0; i < 20; ++i) {
    const RigidTransform jig_to_world(rng.rotation(), rng.normal_vec3(10.0));
    const Vec3 view = rng.unit_vector();
    const CArmModel c = carm_at(Vec3::Zero(), view, any_orthogonal(view));
    const ProjectionImage img = acquire_shot({&jig, jig_to_world}, c, 0.0, rng, counter);
    if (img.detections.size() < 8) continue;
    const PoseCalibration cal = calibrate_pose(img, jig);
    CHECK(test::near(cal.jig_to_camera, compose(c.pose, jig_to_world), 1e-6));
    CHECK(cal.residual_rms_px < 1e-6);
  }
  CHECK(counter.count() == 20);
}

TEST_CASE("bead identification labels perturbed detections") {
  const CalibrationJig jig = default_jig();
  Rng rng(test::kSeed + 2);
  ShotCounter counter;
  const CArmModel truth = carm_at(Vec3::Zero(), Vec3::UnitZ(), Vec3::UnitY());
  const ProjectionImage img = acquire_shot({&jig, RigidTransform::identity()}, truth, 0.5, rng, counter);
  std::vector<PixelPoint> raw;
  for (const auto& d : img.detections) raw.push_back({d.u, d.v});
  CArmModel guess = truth;
  guess.pose = compose(RigidTransform::from_axis_angle(Vec3::UnitY(), deg_to_rad(0.25), Vec3(0.5, -0.3, 0.0)), truth.pose);
  const auto labeled = identify_beads(raw, jig, guess);
  REQUIRE(labeled.size() == img.detections.size());
  for (const auto& l : labeled) {
    const auto it = std::find_if(img.detections.begin(), img.detections.end(),
                                 [&](const Detection& d) { return d.u == l.u && d.v == l.v; });
    REQUIRE(it != img.detections.end());
    CHECK(it->label == l.label);
  }
  check_raises(ErrorKind::TooFewDetections, [&] { (void)identify_beads({raw.begin(), raw.begin() + 5}, jig, guess); });

  auto with_spurious = raw;
  with_spurious.push_back({5.0, 5.0});
  CHECK(identify_beads(with_spurious, jig, guess).size() == img.detections.size());
}

TEST_CASE("two-view registration is exact without noise") {
  TwoViewFixture fx;
  Rng rng(test::kSeed + 3);
  const TrackedProjection ap = fx.shot(Vec3::UnitZ(), Vec3::UnitY(), ViewTag::AP, 0.0, rng);
  const TrackedProjection lat = fx.shot(Vec3::UnitX(), Vec3::UnitZ(), ViewTag::LATERAL, 0.0, rng);
  const TwoViewRegistration reg = register_patient_2d(ap, lat, fx.jig);
  CHECK(reg.registration.fre_rms < 1e-6);
  CHECK(reg.view_separation_rad == doctest::Approx(kPi / 2).epsilon(1e-9));
  const RigidTransform truth = compose(fx.room.drb_to_room.inverse(), ap.image.carm.pose.inverse());
  CHECK(test::near(reg.registration.transform, truth, 1e-6));

  // An arbitrary anatomical point seen in both exposures reconstructs exactly.
  const Vec3 target_room(12.0, -30.0, 1010.0);
  const PixelPoint a = project(ap.image.carm, {target_room}).front();
  const PixelPoint l = project(lat.image.carm, {target_room}).front();
  const Vec3 in_image = reconstruct_point(reg, ap.image.carm, lat.image.carm, a, l);
  CHECK((in_image - ap.image.carm.pose.apply(target_room)).norm() < 1e-6);
}

TEST_CASE("nearly parallel views are refused") {
  TwoViewFixture fx;
  Rng rng(test::kSeed + 4);
  const TrackedProjection ap = fx.shot(Vec3::UnitZ(), Vec3::UnitY(), ViewTag::AP, 0.0, rng);
  const Vec3 tilted = RigidTransform::from_axis_angle(Vec3::UnitY(), deg_to_rad(10.0)).apply_direction(Vec3::UnitZ());
  const TrackedProjection near_ap = fx.shot(tilted, Vec3::UnitY(), ViewTag::LATERAL, 0.0, rng);
  check_raises(ErrorKind::ViewsTooClose, [&] { (void)register_patient_2d(ap, near_ap, fx.jig); });
}

TEST_CASE("shot indices increase strictly") {
  TwoViewFixture fx;
  Rng rng(test::kSeed + 5);
  std::uint64_t last = 0;
  for (int i = 0; i < 10; ++i) {
    const auto tp = fx.shot(Vec3::UnitZ(), Vec3::UnitY(), ViewTag::AP, 0.3, rng);
    CHECK(tp.image.shot_index > last);
    last = tp.image.shot_index;
  }
}

TEST_CASE("projection text round trip") {
  TwoViewFixture fx;
  Rng rng(test::kSeed + 6);
  const auto tp = fx.shot(Vec3::UnitZ(), Vec3::UnitY(), ViewTag::AP, 0.7, rng);
  const std::string text = serialize_projection(tp.image);
  const ProjectionImage back = parse_projection(text);
  CHECK(serialize_projection(back) == text);
  REQUIRE(back.detections.size() == tp.image.detections.size());
  for (std::size_t i = 0; i < back.detections.size(); ++i) {
    CHECK(back.detections[i].label == tp.image.detections[i].label);
    CHECK(std::abs(back.detections[i].u - tp.image.detections[i].u) <= 5e-7);
  }
  CHECK(back.view_tag == ViewTag::AP);
  CHECK(back.shot_index == tp.image.shot_index);
  check_raises(ErrorKind::ParseError, [] { (void)parse_projection("garbage"); });
}

TEST_CASE("triangulation of parallel rays is ill-conditioned") {
  check_raises(ErrorKind::IllConditioned,
               [] { (void)triangulate_midpoint(Vec3::Zero(), Vec3::UnitZ(), Vec3(1, 0, 0), Vec3::UnitZ()); });
  const Vec3 p = triangulate_midpoint(Vec3::Zero(), Vec3(1, 1, 0), Vec3(2, 0, 0), Vec3(-1, 1, 0));
  CHECK((p - Vec3(1, 1, 0)).norm() < 1e-12);
}
