// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "igss/error.hpp"
#include "igss/pose_stream.hpp"
#include "igss/registration.hpp"
#include "igss/robot.hpp"
#include "igss/scene.hpp"
#include "igss/study.hpp"
#include "igss/workflow.hpp"
#include "oracles.hpp"

using namespace igss;

namespace {

constexpr std::uint64_t kSeed = 20240501;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

FiducialSet make_set(const std::vector<Vec3>& pts, const FrameId& frame) {
  FiducialSet s{{}, frame};
  for (std::size_t i = 0; i < pts.size(); ++i) s.points.push_back({"F" + std::to_string(i), pts[i]});
  return s;
}

std::vector<Vec3> random_cloud(Rng& rng, std::size_t n, double spread) {
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.normal_vec3(spread));
  return out;
}

double pose_error(const RigidTransform& a, const RigidTransform& b) {
  return std::max((a.translation() - b.translation()).norm(), rotation_angle_between(a.rotation(), b.rotation()));
}

// ---- registration -------------------------------------------------------

Outcome registration_exactness() {
  Rng rng(kSeed);
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const RigidTransform truth = rng.rigid_transform(500.0);
    const auto pts = random_cloud(rng, 3 + rng.index(18), 60.0);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(truth.apply(p));
    const RegistrationResult r = fit_rigid(make_set(moved, frames::kDrb), make_set(pts, frames::kCtImage));
    double sum = 0.0;
    for (const auto& p : pts) sum += (r.transform.apply(p) - truth.apply(p)).squaredNorm();
    worst = std::max(worst, std::sqrt(sum / static_cast<double>(pts.size())));
  }
  const double elapsed = seconds_since(t0);
  return {worst < 1e-9 && elapsed < 5.0,
          "worst RMSE " + fmt("%.3e", worst) + " mm, " + fmt("%.3f", elapsed) + " s for 1000 fits"};
}

Outcome fre_theory() {
  Rng rng(kSeed + 1);
  const double fle = 1.0, sigma = fle / std::sqrt(3.0);
  bool pass = true;
  std::string detail;
  for (std::size_t n : {4u, 6u, 10u}) {
    const auto moving = make_set(random_cloud(rng, n, 50.0), frames::kCtImage);
    double sum = 0.0;
    constexpr int kTrials = 100000;
    for (int t = 0; t < kTrials; ++t) {
      FiducialSet fixed = moving;
      for (auto& f : fixed.points) f.position += rng.normal_vec3(sigma);
      const double fre = fit_rigid(fixed, moving).fre_rms;
      sum += fre * fre;
    }
    const double ratio = sum / kTrials / (fle * fle);
    const double expected = 1.0 - 2.0 / static_cast<double>(n);
    const double rel = std::abs(ratio - expected) / expected;
    pass = pass && rel <= 0.02;
    detail += "N=" + std::to_string(n) + " ratio " + fmt("%.4f", ratio) + " vs " + fmt("%.4f", expected) + " (" +
              fmt("%.2f", 100.0 * rel) + "%) ";
  }
  return {pass, detail};
}

Outcome tre_theory() {
  Rng rng(kSeed + 2);
  const double fle = 0.8, sigma = fle / std::sqrt(3.0);
  struct Geometry {
    std::vector<Vec3> fiducials;
    Vec3 target;
  };
  const std::vector<Geometry> geometries = {
      {{Vec3(-40, -20, 0), Vec3(35, -25, 5), Vec3(0, 45, -5), Vec3(10, 0, 30)}, Vec3(20, 60, 80)},
      {{Vec3(-30, 0, 0), Vec3(30, 0, 0), Vec3(0, -30, 10), Vec3(0, 30, 10), Vec3(0, 0, -25), Vec3(15, 15, 20)},
       Vec3(0, 0, 120)},
      {{Vec3(-60, -10, 0), Vec3(-20, 10, 5), Vec3(20, -10, 0), Vec3(60, 10, 5), Vec3(0, 25, -10), Vec3(10, -25, 15),
        Vec3(-10, 0, 40), Vec3(40, 30, -20), Vec3(-40, -30, 20), Vec3(0, 0, 0)},
       Vec3(-50, 80, 40)},
  };
  bool pass = true;
  std::string detail;
  for (std::size_t g = 0; g < geometries.size(); ++g) {
    const auto config = make_set(geometries[g].fiducials, frames::kCtImage);
    const Vec3 target = geometries[g].target;
    double sum = 0.0;
    constexpr int kTrials = 50000;
    for (int t = 0; t < kTrials; ++t) {
      FiducialSet fixed = config;
      for (auto& f : fixed.points) f.position += rng.normal_vec3(sigma);
      sum += (fit_rigid(fixed, config).transform.apply(target) - target).squaredNorm();
    }
    const double mc = std::sqrt(sum / kTrials);
    const double pred = predict_tre_rms(config, target, fle).expected_tre_rms;
    const double rel = std::abs(mc - pred) / pred;
    pass = pass && rel <= 0.05;
    detail += "geometry " + std::to_string(g + 1) + " MC " + fmt("%.4f", mc) + " vs " + fmt("%.4f", pred) + " (" +
              fmt("%.2f", 100.0 * rel) + "%) ";
  }
  return {pass, detail};
}

// ---- study --------------------------------------------------------------

struct CalibratedStudy {
  StudyConfig cfg;
  std::string calibration_detail;
};

CalibratedStudy calibrated_config() {
  CalibratedStudy out;
  const auto t0 = Clock::now();
  std::vector<CalibrationResult> results;
  results.push_back(calibrate_noise(out.cfg, 0.99, RegistrationMethod::POINT_BASED));
  results.push_back(calibrate_noise(out.cfg, 1.04, RegistrationMethod::AUTOMATIC_2D));
  apply_calibration(out.cfg, serialize_calibration(results, out.cfg));
  out.calibration_detail = "scales " + fmt("%.4f", results[0].scale) + " / " + fmt("%.4f", results[1].scale) +
                           " calibrated in " + fmt("%.1f", seconds_since(t0)) + " s";
  return out;
}

Outcome table_one(const CalibratedStudy& study) {
  const auto t0 = Clock::now();
  const PhantomReport report = run_phantom_study(study.cfg);
  const double elapsed = seconds_since(t0);
  bool pass = elapsed < 60.0;
  std::string detail;
  for (const auto& c : check_phantom(report)) {
    pass = pass && c.pass;
    detail += c.detail + "; ";
  }
  return {pass, detail + fmt("%.1f", elapsed) + " s for " + std::to_string(report.rows.size()) + " samples (" +
                    study.calibration_detail + ")"};
}

struct CadaverRuns {
  std::vector<CadaverReport> robot;
  std::vector<CadaverReport> navigation;
};

CadaverRuns cadaver_runs(const StudyConfig& base) {
  CadaverRuns out;
  for (RegistrationMethod m : {RegistrationMethod::POINT_BASED, RegistrationMethod::AUTOMATIC_2D}) {
    StudyConfig cfg = base;
    cfg.cadaver_method = m;
    cfg.mode = Mode::ROBOT_ASSISTED;
    out.robot.push_back(run_cadaver_style_study(cfg));
    cfg.mode = Mode::NAVIGATION_ONLY;
    out.navigation.push_back(run_cadaver_style_study(cfg));
  }
  return out;
}

Outcome table_two(const CadaverRuns& runs) {
  bool pass = true;
  std::string detail;
  const auto add = [&](const CadaverReport& r, const char* label) {
    const double a = r.grade_percent[0], ab = a + r.grade_percent[1];
    if (r.config.mode == Mode::ROBOT_ASSISTED) {
      pass = pass && a >= 85.0 && ab >= 95.0;
    } else {
      pass = pass && ab >= 90.0;
    }
    detail += std::string(label) + " " + to_string(r.config.cadaver_method) + " A " + fmt("%.1f", a) + "% A+B " +
              fmt("%.1f", ab) + "%; ";
  };
  for (const auto& r : runs.robot) add(r, "robot");
  for (const auto& r : runs.navigation) add(r, "navigation");
  return {pass, detail};
}

Outcome radiation_ledger(const CadaverRuns& runs) {
  bool pass = true;
  std::string detail = "mean shots/screw";
  for (const auto* group : {&runs.robot, &runs.navigation}) {
    for (const auto& r : *group) {
      pass = pass && r.mean_shots_per_screw == 3.0 && r.ledgers_consistent && r.total_shots == 3 * r.rows.size();
      detail += " " + fmt("%.6f", r.mean_shots_per_screw);
    }
  }
  Rng rng(kSeed + 3);
  std::size_t checks = 0;
  for (int seq = 0; seq < 1000; ++seq) {
    RadiationLedger ledger;
    std::uint64_t shots = 0;
    const int n = static_cast<int>(rng.index(200));
    for (int i = 0; i < n; ++i) {
      ledger.record("s" + std::to_string(rng.index(12)), rng.uniform() < 0.4 ? ShotPhase::PLACEMENT : ShotPhase::VERIFICATION);
      ++shots;
      pass = pass && ledger.consistent() && ledger.total() == shots;
      ++checks;
    }
    if (ledger.screw_count() > 0) {
      pass = pass && ledger.mean_per_screw() == static_cast<double>(shots) / static_cast<double>(ledger.screw_count());
    }
  }
  return {pass, detail + "; " + std::to_string(checks) + " fuzzed ledger updates consistent"};
}

// ---- grading ------------------------------------------------------------

Outcome grading_oracle() {
  const auto spine = build_default_spine(known_levels());
  Rng rng(kSeed + 4);
  double worst = 0.0;
  std::size_t breaching = 0;
  for (int i = 0; i < 1000; ++i) {
    const VertebraModel& v = spine[rng.index(spine.size())];
    const ScrewPlan p = oracle::perturbed_plan(v, rng);
    const double analytic = validate_trajectory(p, v).max_breach_depth;
    worst = std::max(worst, std::abs(analytic - oracle::breach_depth(p, v)));
    breaching += analytic > 0.0 ? 1 : 0;
  }
  const bool edges = grade_gertzbein(0.0, false) == Grade::A && grade_gertzbein(1.99, false) == Grade::B &&
                     grade_gertzbein(2.0, false) == Grade::C && grade_gertzbein(4.0, false) == Grade::D &&
                     grade_gertzbein(6.0, false) == Grade::E && grade_gertzbein(0.0, true) == Grade::E;
  return {worst <= 0.01 && edges, "worst gap " + fmt("%.2e", worst) + " mm over 1000 cases (" +
                                      std::to_string(breaching) + " breaching); bin edges " +
                                      (edges ? "exact" : "WRONG")};
}

// ---- robot --------------------------------------------------------------

Outcome robot_kinematics() {
  const ArmModel arm = default_arm();
  Rng rng(kSeed + 5);

  int ik_ok = 0;
  for (int i = 0; i < 1000; ++i) {
    const JointState q = oracle::random_joints(rng);
    const RigidTransform target = fk(arm, q);
    JointState seed = q;
    for (int j = 0; j < 6; ++j) seed(j) = std::clamp(q(j) + rng.normal(0.0, 0.3), -kPi, kPi);
    try {
      const IkResult r = ik_solve(arm, target, seed);
      const RigidTransform got = fk(arm, r.q);
      if ((got.translation() - target.translation()).norm() <= 1e-6 &&
          rotation_angle_between(got.rotation(), target.rotation()) <= 1e-6) {
        ++ik_ok;
      }
    } catch (const Error&) {
    }
  }

  int compared = 0, disagreements = 0, colliding = 0;
  for (int i = 0; i < 1000; ++i) {
    const JointState q = oracle::random_joints(rng);
    const auto obstacles = oracle::obstacles_near_arm(arm, q, rng);
    const double truth = oracle::arm_clearance(arm, q, obstacles);
    if (std::abs(truth) <= 0.1) continue;
    ++compared;
    const bool hit = check_collision(arm, q, obstacles).colliding;
    colliding += hit ? 1 : 0;
    if (hit != (truth < 0.0)) ++disagreements;
  }

  int planned = 0, retracted = 0, bad_waypoints = 0;
  for (int i = 0; i < 1000; ++i) {
    const JointState from = oracle::random_joints(rng, 2.0), to = oracle::random_joints(rng, 2.0);
    std::vector<Obstacle> obstacles;
    const int n = 1 + static_cast<int>(rng.index(3));
    for (int k = 0; k < n; ++k) {
      obstacles.emplace_back(Sphere{Vec3(rng.uniform(-700, 700), rng.uniform(-700, 700), rng.uniform(-200, 400)),
                                    rng.uniform(30.0, 120.0)});
    }
    try {
      const Trajectory t = plan_trajectory(arm, from, to, 0.02, obstacles);
      ++planned;
      retracted += t.via_retract ? 1 : 0;
      for (const auto& w : t.waypoints) bad_waypoints += check_collision(arm, w, obstacles).colliding ? 1 : 0;
    } catch (const Error&) {
    }
  }

  const bool pass = ik_ok >= 990 && disagreements == 0 && bad_waypoints == 0;
  return {pass, "IK " + std::to_string(ik_ok) + "/1000 within 1e-6; collision " + std::to_string(disagreements) +
                    " disagreements over " + std::to_string(compared) + " scenes (" + std::to_string(colliding) +
                    " colliding); " + std::to_string(planned) + " trajectories planned (" + std::to_string(retracted) +
                    " via retract), " + std::to_string(bad_waypoints) + " colliding waypoints"};
}

// ---- workflow -----------------------------------------------------------

EventPayload random_payload(const EdgeTable& table, const SessionState& s, Rng& rng) {
  static const auto names = transition_names(table);
  const double u = rng.uniform();
  if (u < 0.5) {
    std::vector<const Edge*> out;
    for (const auto& e : table) {
      if (e.from == s.state && e.guard != Guard::REGISTRATION_ACCEPTED && e.guard != Guard::REGISTRATION_REJECTED) {
        out.push_back(&e);
      }
    }
    if (!out.empty()) return TransitionEvent{out[rng.index(out.size())]->event};
    return TransitionEvent{names[rng.index(names.size())]};
  }
  if (u < 0.6) return TransitionEvent{names[rng.index(names.size())]};
  if (u < 0.7) {
    RegistrationEvent r;
    r.modality = static_cast<Modality>(rng.index(3));
    r.fre_rms = rng.uniform(0.0, 3.0);
    return r;
  }
  if (u < 0.8) {
    const double rms = rng.uniform(0.0, 4.0);
    return VerificationEvent{rms, 2.0, 3 + rng.index(3), rms < 2.0};
  }
  if (u < 0.85) {
    return ConfigureEvent{{static_cast<Mode>(rng.index(2)), static_cast<Modality>(rng.index(3)),
                           static_cast<Technique>(rng.index(2))}};
  }
  if (u < 0.9) {
    static const auto spine = build_default_spine({"L4"});
    return PlanUpsertEvent{"p" + std::to_string(rng.index(2)), axial_plan(spine.front(), Side::Left, 40.0, 6.5)};
  }
  if (u < 0.95) return RobotAlignedEvent{"p" + std::to_string(rng.index(2)), JointState::Zero(), 5.0};
  return ShotEvent{"s" + std::to_string(rng.index(3)), static_cast<ShotPhase>(rng.index(2))};
}

Outcome workflow_safety() {
  const EdgeTable table = default_edge_table();
  Rng rng(kSeed + 6);
  std::size_t violations = 0, replay_mismatches = 0, reached_nav = 0, reached_robot = 0, events = 0;
  for (int seq = 0; seq < 100000; ++seq) {
    SessionState state;
    std::vector<Event> log;
    for (int i = 0; i < 60; ++i) {
      Event e{log.size() + 1, static_cast<double>(i), random_payload(table, state, rng)};
      try {
        state = apply(table, state, e);
      } catch (const Error&) {
        continue;
      }
      log.push_back(std::move(e));
      if (state.state == WorkflowState::NAVIGATION) {
        ++reached_nav;
        if (!state.registration_verified || !state.verification || !state.verification->accepted) ++violations;
      }
      if (state.state == WorkflowState::ROBOT_ALIGNED) {
        ++reached_robot;
        if (state.config.mode != Mode::ROBOT_ASSISTED) ++violations;
      }
    }
    events += log.size();
    const std::string text = serialize_log(log);
    const auto parsed = parse_log(text);
    const SessionState again = replay(table, parsed);
    if (serialize_log(parsed) != text || build_report("fuzz", again, true) != build_report("fuzz", state, true)) {
      ++replay_mismatches;
    }
  }
  return {violations == 0 && replay_mismatches == 0 && reached_nav > 0 && reached_robot > 0,
          std::to_string(violations) + " safety violations, " + std::to_string(replay_mismatches) +
              " replay mismatches over 100000 sequences (" + std::to_string(events) + " accepted events; " +
              std::to_string(reached_nav) + " NAVIGATION and " + std::to_string(reached_robot) +
              " ROBOT_ALIGNED visits)"};
}

// ---- navigation ---------------------------------------------------------

Outcome patient_motion_invariance() {
  const OperatingRoom room = default_operating_room();
  const auto spine = build_default_spine({"L3"});
  const ScrewPlan plan = axial_plan(spine.front(), Side::Right, 40.0, 6.5);
  Rng rng(kSeed + 7);
  double worst = 0.0;
  bool all_tracked = true;
  for (int i = 0; i < 1000; ++i) {
    const RigidTransform tool_in_drb = compose(RigidTransform::from_translation(Vec3(0, 0, 150)), rng.rigid_transform(100.0));
    const RigidTransform motion = rng.rigid_transform(150.0);
    const auto frame_in = [&](const OperatingRoom& r) {
      NavigationScene scene;
      scene.drb = r.drb;
      scene.stylus = r.stylus;
      scene.drb_to_tracker = r.drb_to_tracker();
      scene.image_to_drb = r.image_to_drb();
      scene.noise = {0.0, 1.0};
      scene.plan = std::make_pair(std::string("L3-right"), plan);
      const RigidTransform tool_to_tracker = compose(r.drb_to_tracker(), tool_in_drb);
      scene.tool_path = [tool_to_tracker](double) { return tool_to_tracker; };
      return navigation_frame(scene, static_cast<std::uint64_t>(i), 0.0);
    };
    const NavigationFrame a = frame_in(room), b = frame_in(room.with_patient_motion(motion));
    if (!a.tracked || !b.tracked) {
      all_tracked = false;
      continue;
    }
    worst = std::max({worst, pose_error(a.tool_to_image, b.tool_to_image), (a.tip_image - b.tip_image).norm(),
                      std::abs(a.deviation->entry_mm - b.deviation->entry_mm),
                      std::abs(a.deviation->lateral_mm - b.deviation->lateral_mm),
                      std::abs(a.deviation->angle_deg - b.deviation->angle_deg)});
  }
  return {all_tracked && worst <= 1e-9,
          "worst change " + fmt("%.2e", worst) + " over 1000 motions" + (all_tracked ? "" : " (tracking lost)")};
}

}  // namespace

int main() {
  struct Criterion {
    std::string name;
    std::function<Outcome()> run;
  };
  CalibratedStudy study;
  CadaverRuns cadaver;
  const std::vector<Criterion> criteria = {
      {"registration exactness", registration_exactness},
      {"FRE theory", fre_theory},
      {"TRE theory", tre_theory},
      {"calibrated phantom accuracy",
       [&] {
         study = calibrated_config();
         return table_one(study);
       }},
      {"grading oracle", grading_oracle},
      {"calibrated screw placement",
       [&] {
         cadaver = cadaver_runs(study.cfg);
         return table_two(cadaver);
       }},
      {"radiation ledger", [&] { return radiation_ledger(cadaver); }},
      {"robot kinematics", robot_kinematics},
      {"workflow safety", workflow_safety},
      {"patient-motion invariance", patient_motion_invariance},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << " [" << fmt("%.1f", seconds_since(t0))
              << " s]" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
