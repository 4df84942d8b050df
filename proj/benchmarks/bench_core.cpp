#include <benchmark/benchmark.h>

#include <vector>

#include "igss/carm.hpp"
#include "igss/planning.hpp"
#include "igss/registration.hpp"
#include "igss/rng.hpp"
#include "igss/robot.hpp"
#include "igss/scene.hpp"

namespace {

using namespace igss;

void BM_FitRigid(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(7);
  const RigidTransform truth = rng.rigid_transform(200.0);
  FiducialSet moving{{}, frames::kCtImage}, fixed{{}, frames::kDrb};
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 p = rng.normal_vec3(50.0);
    const std::string label = "F" + std::to_string(i);
    moving.points.push_back({label, p});
    fixed.points.push_back({label, truth.apply(p) + rng.normal_vec3(0.2)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_rigid(fixed, moving));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_FitRigid)->Arg(4)->Arg(10)->Arg(100)->Arg(1000);

void BM_CalibratePose(benchmark::State& state) {
  const CalibrationJig jig = default_jig();
  const JigScene scene{&jig, RigidTransform::from_translation(Vec3(5.0, -3.0, 0.0))};
  CArmModel carm;
  carm.pose = carm_pose_looking_at(Vec3::Zero(), Vec3::UnitZ(), 650.0, Vec3::UnitY());
  Rng rng(11);
  ShotCounter counter;
  const ProjectionImage image = acquire_shot(scene, carm, 0.5, rng, counter, ViewTag::AP);
  for (auto _ : state) benchmark::DoNotOptimize(calibrate_pose(image, jig));
}
BENCHMARK(BM_CalibratePose);

void BM_InverseKinematics(benchmark::State& state) {
  const ArmModel arm = default_arm();
  Rng rng(3);
  std::vector<std::pair<RigidTransform, JointState>> cases;
  for (int i = 0; i < 64; ++i) {
    JointState q;
    for (int j = 0; j < 6; ++j) q(j) = rng.uniform(-2.0, 2.0);
    JointState seed = q;
    for (int j = 0; j < 6; ++j) seed(j) += rng.normal(0.0, 0.2);
    cases.emplace_back(fk(arm, q), seed);
  }
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& [target, seed] = cases[k++ % cases.size()];
    benchmark::DoNotOptimize(ik_solve(arm, target, seed));
  }
}
BENCHMARK(BM_InverseKinematics);

void BM_ValidateTrajectory(benchmark::State& state) {
  const auto spine = build_default_spine({"L3"});
  const VertebraModel& v = spine.front();
  Rng rng(5);
  std::vector<ScrewPlan> plans;
  for (int i = 0; i < 256; ++i) {
    ScrewPlan p = axial_plan(v, i % 2 ? Side::Left : Side::Right, 40.0, 6.5);
    p.entry += rng.normal_vec3(1.5);
    p.direction = (p.direction + rng.normal_vec3(0.05)).normalized();
    plans.push_back(p);
  }
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(validate_trajectory(plans[k++ % plans.size()], v));
}
BENCHMARK(BM_ValidateTrajectory);

void BM_CheckCollision(benchmark::State& state) {
  const ArmModel arm = default_arm();
  const OperatingRoom room = default_operating_room();
  const auto obstacles = room.obstacles_in_base();
  Rng rng(9);
  std::vector<JointState> qs;
  for (int i = 0; i < 256; ++i) {
    JointState q;
    for (int j = 0; j < 6; ++j) q(j) = rng.uniform(-kPi, kPi);
    qs.push_back(q);
  }
  std::size_t k = 0;
  for (auto _ : state) benchmark::DoNotOptimize(check_collision(arm, qs[k++ % qs.size()], obstacles));
}
BENCHMARK(BM_CheckCollision);

}  // namespace

BENCHMARK_MAIN();
