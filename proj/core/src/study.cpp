#include "igss/study.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "igss/carm.hpp"
#include "igss/decimal.hpp"
#include "igss/error.hpp"
#include "igss/robot.hpp"

namespace igss {

std::string to_string(RegistrationMethod m) {
  return m == RegistrationMethod::POINT_BASED ? "point_based" : "automatic_2d";
}

RegistrationMethod registration_method_from_string(const std::string& s) {
  if (s == "point_based") return RegistrationMethod::POINT_BASED;
  if (s == "automatic_2d") return RegistrationMethod::AUTOMATIC_2D;
  raise(ErrorKind::ParseError, "unknown registration method " + s);
}

Modality modality_for(RegistrationMethod m) {
  return m == RegistrationMethod::POINT_BASED ? Modality::POINT_BASED_PREOP_CT : Modality::AUTOMATIC_INTRAOP_2D;
}

void StudyConfig::validate() const {
  if (samples < 2) raise(ErrorKind::InvalidArgument, "samples must be >= 2");
  if (methods.empty()) raise(ErrorKind::InvalidArgument, "no registration methods");
  if (group_multipliers.empty() || tool_angles_deg.empty() || tracker_distances_mm.empty() ||
      detector_distances_mm.empty()) {
    raise(ErrorKind::InvalidArgument, "every factor needs at least one level");
  }
  for (double m : group_multipliers) {
    if (!(m > 0.0)) raise(ErrorKind::InvalidArgument, "group multipliers must be > 0");
  }
  for (double a : tool_angles_deg) {
    if (!(a >= 0.0 && a < 90.0)) raise(ErrorKind::InvalidArgument, "tool angles must be in [0, 90) deg");
  }
  for (double d : tracker_distances_mm) {
    if (!(d > 0.0)) raise(ErrorKind::InvalidArgument, "tracker distances must be > 0");
  }
  for (double d : detector_distances_mm) {
    if (!(d > 0.0 && d < 900.0)) raise(ErrorKind::InvalidArgument, "detector distances must be in (0, 900) mm");
  }
  for (const auto& [m, s] : noise.scale) {
    if (!(s >= 0.0)) raise(ErrorKind::InvalidArgument, "noise scale must be >= 0");
  }
  if (noise.tracker_sigma_mm < 0.0 || noise.pixel_sigma < 0.0 || noise.landmark_sigma_mm < 0.0 || !(noise.reference_distance_mm > 0.0)) {
    raise(ErrorKind::InvalidArgument, "invalid noise model");
  }
  if (threads < 1) raise(ErrorKind::InvalidArgument, "threads must be >= 1");
  if (levels.empty()) raise(ErrorKind::InvalidArgument, "no vertebral levels");
  const auto table = default_level_table();
  for (const auto& l : levels) {
    if (!table.count(l)) raise(ErrorKind::UnknownLevel, "unknown vertebral level " + l);
  }
  if (verification_probes < 3) raise(ErrorKind::InvalidArgument, "verification needs >= 3 probes");
  if (imaging.placement_shots < 0 || imaging.verification_shots < 0) {
    raise(ErrorKind::InvalidArgument, "shot counts must be >= 0");
  }
}

// ---- scene helpers ------------------------------------------------------

std::vector<Fiducial> vertebra_landmarks(const VertebraModel& v) {
  const Vec3 m = 0.5 * (v.left_pedicle.center + v.right_pedicle.center);
  return {
      {"spinous", m + Vec3(0.0, -38.0, -5.0)},       {"lamina_left", m + Vec3(12.0, -22.0, 4.0)},
      {"lamina_right", m + Vec3(-12.0, -22.0, 4.0)}, {"transverse_left", m + Vec3(32.0, -6.0, 2.0)},
      {"transverse_right", m + Vec3(-30.0, -6.0, 2.0)}, {"facet_left", m + Vec3(16.0, -14.0, 14.0)},
      {"facet_right", m + Vec3(-16.0, -14.0, 14.0)},
  };
}

OperatingRoom room_with_tracker_distance(const OperatingRoom& room, const Vec3& roi_room, double distance_mm) {
  OperatingRoom out = room;
  const Vec3 toward_tracker = (room.tracker_to_room.translation() - roi_room).normalized();
  out.tracker_to_room = look_at(roi_room + distance_mm * toward_tracker, roi_room);
  return out;
}

namespace {

constexpr double kNoLimit = std::numeric_limits<double>::infinity();

double angle_factor(const NoiseModel& n, double angle_deg) {
  return 1.0 + n.angle_gain * (1.0 / std::cos(deg_to_rad(angle_deg)) - 1.0);
}

MarkerNoise tracker_noise(const NoiseModel& n, const Factors& f) {
  return {n.tracker_sigma_mm * (f.tracker_distance_mm / n.reference_distance_mm), n.tracker_depth_factor};
}

double landmark_sigma(const NoiseModel& n, const Factors& f, double scale) {
  return scale * n.landmark_sigma_mm * f.group_multiplier * angle_factor(n, f.tool_angle_deg);
}

// Measured pose (body -> tracker) of `tool` placed at `body_to_room`.
RigidTransform measure(const OperatingRoom& room, const ToolDefinition& tool, const RigidTransform& body_to_room,
                       const MarkerNoise& noise, Rng& rng) {
  TrackerFrame frame;
  frame.observations.push_back(observe_tool(tool, compose(room.room_to_tracker(), body_to_room), noise, rng));
  return estimate_tool_pose(frame, tool, kNoLimit).body_to_tracker.pose;
}

// Stylus with its tip on `tip_room`, shaft tilted `angle_deg` from vertical.
RigidTransform stylus_pose(const ToolDefinition& stylus, const Vec3& tip_room, const Vec3& shaft_dir) {
  Mat3 r;
  r.col(2) = shaft_dir.normalized();
  Vec3 x = Vec3::UnitX() - Vec3::UnitX().dot(r.col(2)) * r.col(2);
  if (x.norm() < 1e-6) x = any_orthogonal(r.col(2));
  r.col(0) = x.normalized();
  r.col(1) = r.col(2).cross(r.col(0));
  const Vec3 tip = stylus.tip_offset.value_or(Vec3(0.0, 0.0, 150.0));
  return {r, tip_room - r * tip};
}

Vec3 tilted_down(double angle_deg) {
  return rot_x(deg_to_rad(angle_deg)) * Vec3(0.0, 0.0, -1.0);
}

// Stylus tip position in the DRB frame as the navigation system measures it
// when the user aims for `landmark_room`.
Vec3 probe_in_drb(const OperatingRoom& room, const Vec3& landmark_room, const Factors& f, const MarkerNoise& noise,
                  double localization_sigma, Rng& rng) {
  const double dx = rng.normal(), dy = rng.normal(), dz = rng.normal();
  const Vec3 tip_room = landmark_room + localization_sigma * Vec3(dx, dy, dz);
  const RigidTransform stylus_to_room = stylus_pose(room.stylus, tip_room, tilted_down(f.tool_angle_deg));
  const RigidTransform tool = measure(room, room.stylus, stylus_to_room, noise, rng);
  const RigidTransform drb = measure(room, room.drb, room.drb_to_room, noise, rng);
  const Vec3 tip = room.stylus.tip_offset.value_or(Vec3(0.0, 0.0, 150.0));
  return compose(drb.inverse(), tool).apply(tip);
}

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

}  // namespace

RegistrationSample run_point_based_sample(const OperatingRoom& base_room, const std::vector<Fiducial>& landmarks,
                                          const Factors& f, const NoiseModel& noise, double scale, Rng& rng,
                                          const std::vector<Vec3>& targets_room) {
  std::vector<Vec3> room_pts;
  for (const auto& l : landmarks) room_pts.push_back(base_room.image_to_room.apply(l.position));
  const OperatingRoom room = room_with_tracker_distance(base_room, centroid(room_pts), f.tracker_distance_mm);
  const MarkerNoise mn = tracker_noise(noise, f);
  const double ls = landmark_sigma(noise, f, scale);

  FiducialSet image{landmarks, frames::kCtImage};
  FiducialSet physical;
  physical.frame = frames::kDrb;
  for (std::size_t k = 0; k < landmarks.size(); ++k) {
    physical.points.push_back({landmarks[k].label, probe_in_drb(room, room_pts[k], f, mn, ls, rng)});
  }
  const RegistrationResult r = fit_rigid(physical, image);
  RegistrationSample out{r.fre_rms, r.transform, room.image_to_drb(), {}};
  for (const auto& t : targets_room) out.targets_drb.push_back(r.transform.apply(room.image_to_room.inverse().apply(t)));
  return out;
}

RegistrationSample run_automatic_2d_sample(const OperatingRoom& base_room, const Vec3& roi_room, const Factors& f,
                                           const NoiseModel& noise, double scale, Rng& rng,
                                           const std::vector<Vec3>& targets_room) {
  const OperatingRoom room = room_with_tracker_distance(base_room, roi_room, f.tracker_distance_mm);
  const MarkerNoise mn = tracker_noise(noise, f);
  const double pixel_sigma = scale * noise.pixel_sigma * f.group_multiplier;

  static const CalibrationJig jig = default_jig();
  const RigidTransform jig_to_room = RigidTransform::from_translation(roi_room + Vec3(0.0, 0.0, 60.0));
  const JigScene scene{&jig, jig_to_room};
  ShotCounter counter;

  CArmModel carm;
  const double source_to_iso = carm.source_detector_distance - f.detector_distance_mm;
  const Vec3 iso = jig_to_room.translation();

  auto shot = [&](const Vec3& view, const Vec3& up, ViewTag tag) {
    CArmModel c = carm;
    c.pose = carm_pose_looking_at(iso, view, source_to_iso, up);
    TrackedProjection tp;
    tp.image = acquire_shot(scene, c, pixel_sigma, rng, counter, tag);
    const RigidTransform jig_est = measure(room, jig.tracker_markers, jig_to_room, mn, rng);
    const RigidTransform drb_est = measure(room, room.drb, room.drb_to_room, mn, rng);
    tp.frames = FrameGraph{}.with_edge(frames::kJig, frames::kTracker, jig_est).with_edge(frames::kDrb, frames::kTracker,
                                                                                          drb_est);
    return tp;
  };
  const TrackedProjection ap = shot(Vec3::UnitZ(), Vec3::UnitY(), ViewTag::AP);
  const TrackedProjection lat = shot(Vec3::UnitX(), Vec3::UnitZ(), ViewTag::LATERAL);

  TwoViewOptions opts;
  opts.calibration.max_residual_px = kNoLimit;
  const TwoViewRegistration reg = register_patient_2d(ap, lat, jig, opts);

  const RigidTransform ap_cam_to_room = ap.image.carm.pose.inverse();
  RegistrationSample out{reg.registration.fre_rms, reg.registration.transform,
                         compose(room.drb_to_room.inverse(), ap_cam_to_room), {}};
  for (const auto& t : targets_room) {
    const PixelPoint a = project(ap.image.carm, {t}).front();
    const PixelPoint l = project(lat.image.carm, {t}).front();
    out.targets_drb.push_back(reg.registration.transform.apply(reconstruct_point(reg, ap.image.carm, lat.image.carm, a, l)));
  }
  return out;
}

// ---- phantom study ------------------------------------------------------

Factors factors_for(const StudyConfig& cfg, std::size_t i) {
  const std::size_t g = cfg.group_multipliers.size();
  const std::size_t a = cfg.tool_angles_deg.size();
  const std::size_t d = cfg.tracker_distances_mm.size();
  const std::size_t c = cfg.detector_distances_mm.size();
  Factors f;
  f.group_multiplier = cfg.group_multipliers[i % g];
  f.tool_angle_deg = cfg.tool_angles_deg[(i / g) % a];
  f.tracker_distance_mm = cfg.tracker_distances_mm[(i / (g * a)) % d];
  f.detector_distance_mm = cfg.detector_distances_mm[(i / (g * a * d)) % c];
  return f;
}

namespace {

std::uint64_t method_stream(RegistrationMethod m, std::size_t index) {
  return (static_cast<std::uint64_t>(m) + 1) << 40 | static_cast<std::uint64_t>(index);
}

struct PhantomScene {
  OperatingRoom room = default_operating_room();
  std::vector<Fiducial> landmarks;
  Vec3 roi_room = Vec3::Zero();

  PhantomScene() {
    const VertebraModel l3 = build_default_spine({"L3"}).front();
    landmarks = vertebra_landmarks(l3);
    std::vector<Vec3> pts;
    for (const auto& l : landmarks) pts.push_back(room.image_to_room.apply(l.position));
    roi_room = centroid(pts);
  }
};

const PhantomScene& phantom_scene() {
  static const PhantomScene scene;
  return scene;
}

double scale_of(const NoiseModel& n, RegistrationMethod m) {
  const auto it = n.scale.find(m);
  return it == n.scale.end() ? 1.0 : it->second;
}

double run_trial(const StudyConfig& cfg, RegistrationMethod m, double scale, std::size_t index, std::uint64_t seed) {
  const PhantomScene& scene = phantom_scene();
  Rng rng = Rng::for_stream(seed, method_stream(m, index));
  const Factors f = factors_for(cfg, index);
  if (m == RegistrationMethod::POINT_BASED) {
    return run_point_based_sample(scene.room, scene.landmarks, f, cfg.noise, scale, rng).fre_rms;
  }
  return run_automatic_2d_sample(scene.room, scene.roi_room, f, cfg.noise, scale, rng).fre_rms;
}

// Evaluates fn(i) for i in [0, n) on `threads` workers; results by index.
template <typename Fn>
std::vector<double> parallel_map(std::size_t n, int threads, Fn fn) {
  std::vector<double> out(n);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(threads), n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) out[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string factor_key(double v) { return format_fixed6(v); }

}  // namespace

double phantom_mean(const StudyConfig& cfg, RegistrationMethod method, double scale, std::size_t samples,
                    std::uint64_t seed) {
  auto values = parallel_map(samples, cfg.threads, [&](std::size_t i) { return run_trial(cfg, method, scale, i, seed); });
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

PhantomReport run_phantom_study(const StudyConfig& cfg) {
  cfg.validate();
  PhantomReport rep;
  rep.config = cfg;
  for (const auto m : cfg.methods) {
    const double scale = scale_of(cfg.noise, m);
    const auto values =
        parallel_map(cfg.samples, cfg.threads, [&](std::size_t i) { return run_trial(cfg, m, scale, i, cfg.seed); });
    MethodSummary summary;
    summary.stats = summarize(values);
    std::map<std::string, std::map<std::string, std::vector<double>>> groups;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const Factors f = factors_for(cfg, i);
      rep.rows.push_back({m, i, f, values[i]});
      groups["group_multiplier"][factor_key(f.group_multiplier)].push_back(values[i]);
      groups["tool_angle_deg"][factor_key(f.tool_angle_deg)].push_back(values[i]);
      groups["tracker_distance_mm"][factor_key(f.tracker_distance_mm)].push_back(values[i]);
      if (m == RegistrationMethod::AUTOMATIC_2D) {
        groups["detector_distance_mm"][factor_key(f.detector_distance_mm)].push_back(values[i]);
      }
    }
    for (const auto& [factor, levels] : groups) {
      for (const auto& [level, vals] : levels) {
        if (vals.size() >= 2) summary.breakdown[factor][level] = summarize(vals);
      }
    }
    rep.methods[m] = std::move(summary);
  }
  return rep;
}

// ---- calibration --------------------------------------------------------

CalibrationResult calibrate_noise(const StudyConfig& cfg, double target_mu, RegistrationMethod method,
                                  std::size_t samples, double rel_tol, double lo, double hi) {
  if (target_mu < 0.0) raise(ErrorKind::InvalidArgument, "target mean must be >= 0");
  CalibrationResult out;
  out.method = method;
  out.target_mu = target_mu;
  if (target_mu == 0.0) return out;
  if (!(lo >= 0.0 && hi > lo)) raise(ErrorKind::NonMonotoneBracket, "bracket must satisfy 0 <= lo < hi");
  const std::uint64_t seed = mix_seed(cfg.seed ^ 0xca11b7a7e5eedULL);
  auto mu = [&](double s) { return phantom_mean(cfg, method, s, samples, seed); };
  double mu_lo = mu(lo), mu_hi = mu(hi);
  for (int grow = 0; grow < 6 && mu_lo <= target_mu && mu_hi < target_mu; ++grow) {
    lo = hi;
    mu_lo = mu_hi;
    hi *= 2.0;
    mu_hi = mu(hi);
  }
  if (!(mu_lo <= target_mu && mu_hi >= target_mu)) {
    raise(ErrorKind::NonMonotoneBracket, "simulated mean " + format_fixed6(mu_lo) + ".." + format_fixed6(mu_hi) +
                                             " mm over the bracket does not straddle " + format_fixed6(target_mu));
  }
  double s = lo, m = mu_lo;
  for (out.iterations = 1; out.iterations <= 60; ++out.iterations) {
    // Secant step clipped into the bracket, falling back to bisection.
    s = lo + (target_mu - mu_lo) * (hi - lo) / (mu_hi - mu_lo);
    if (!(s > lo && s < hi) || out.iterations % 3 == 0) s = 0.5 * (lo + hi);
    m = mu(s);
    if (std::abs(m - target_mu) <= rel_tol * target_mu) break;
    if (m < target_mu) {
      lo = s;
      mu_lo = m;
    } else {
      hi = s;
      mu_hi = m;
    }
    if (mu_hi < mu_lo) raise(ErrorKind::NonMonotoneBracket, "simulated mean is not monotone in the noise scale");
  }
  out.scale = s;
  out.achieved_mu = m;
  return out;
}

// ---- cadaver-style study ------------------------------------------------

namespace {

struct CadaverContext {
  const StudyConfig& cfg;
  OperatingRoom room = default_operating_room();
  ArmModel arm = default_arm();
  std::map<std::string, VertebraModel> spine;

  explicit CadaverContext(const StudyConfig& c) : cfg(c) {
    for (auto& v : build_default_spine(c.levels)) spine.emplace(v.level, std::move(v));
  }
};

double screw_diameter(const StudyConfig& cfg, const std::string& level) {
  return level[0] == 'T' ? cfg.thoracic_screw_diameter : cfg.lumbar_screw_diameter;
}

// Achieved placement through `m`, a transform taking planned CT coordinates to
// where the screw physically lands (also in CT coordinates).
ScrewPlan moved(const ScrewPlan& plan, const RigidTransform& m) {
  ScrewPlan out = plan;
  out.entry = m.apply(plan.entry);
  out.direction = m.apply_direction(plan.direction).normalized();
  return out;
}

struct SessionOutcome {
  std::vector<ScrewRow> rows;
  std::string report;
  bool ledger_consistent = true;
  std::uint64_t shots = 0;
  std::size_t screws = 0;
  std::size_t rejections = 0;
  std::vector<double> fre;
};

SessionOutcome run_session(const CadaverContext& ctx, std::size_t k, std::size_t n_screws) {
  const StudyConfig& cfg = ctx.cfg;
  const VertebraModel& v = ctx.spine.at(cfg.levels[k % cfg.levels.size()]);
  Rng rng = Rng::for_stream(cfg.seed, (std::uint64_t{3} << 40) | k);
  const Factors f;  // nominal setup
  const RegistrationMethod method = cfg.cadaver_method;
  const double scale = scale_of(cfg.noise, method);

  const auto landmarks = vertebra_landmarks(v);
  std::vector<Vec3> lm_room;
  for (const auto& l : landmarks) lm_room.push_back(ctx.room.image_to_room.apply(l.position));
  const Vec3 roi = centroid(lm_room);
  const OperatingRoom room = room_with_tracker_distance(ctx.room, roi, f.tracker_distance_mm);
  const MarkerNoise mn = tracker_noise(cfg.noise, f);
  const double ls = landmark_sigma(cfg.noise, f, scale_of(cfg.noise, RegistrationMethod::POINT_BASED));

  double clock = 0.0;
  Session wf("cadaver-" + std::to_string(k), default_edge_table(), [&clock] { return clock += 1.0; });
  wf.configure({cfg.mode, modality_for(method), cfg.technique});
  wf.advance("patient_input");
  wf.advance("begin_planning");
  std::vector<std::pair<std::string, ScrewPlan>> plans;
  const Side sides[2] = {Side::Left, Side::Right};
  for (std::size_t s = 0; s < n_screws; ++s) {
    const std::string id = v.level + "-" + to_string(sides[s]) + "-" + std::to_string(k);
    plans.emplace_back(id, axial_plan(v, sides[s], cfg.screw_length, screw_diameter(cfg, v.level)));
    wf.upsert_plan(id, plans.back().second);
  }
  wf.advance("begin_intraop_prep");
  wf.advance("calibrate_instruments");
  wf.advance("attach_drb");
  if (cfg.mode == Mode::ROBOT_ASSISTED) wf.advance("position_robot_cart");
  wf.advance("mount_carm_calibrator");
  wf.advance("acquire_intraop_images");
  wf.advance("begin_registration");

  // Anatomy the plans refer to; the registered CT -> DRB map is the rigid fit
  // of where the navigation chain places these points.
  std::vector<Vec3> anchors_ct;
  for (Side side : {Side::Left, Side::Right}) {
    const auto& p = v.pedicle(side);
    anchors_ct.push_back(p.entry_point());
    anchors_ct.push_back(p.entry_point() + p.length * p.axis.normalized());
  }
  for (const auto& l : landmarks) anchors_ct.push_back(l.position);
  std::vector<Vec3> anchors_room;
  for (const auto& a : anchors_ct) anchors_room.push_back(room.image_to_room.apply(a));

  SessionOutcome out;
  const RigidTransform ct_to_drb_true = room.image_to_drb();
  RigidTransform ct_to_drb_est;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 5) raise(ErrorKind::NonConvergence, "registration rejected five times");
    const RegistrationSample sample =
        method == RegistrationMethod::POINT_BASED
            ? run_point_based_sample(room, landmarks, f, cfg.noise, scale, rng, anchors_room)
            : run_automatic_2d_sample(room, roi, f, cfg.noise, scale, rng, anchors_room);
    ct_to_drb_est = fit_rigid_points(sample.targets_drb, anchors_ct);
    RegistrationEvent reg;
    reg.modality = modality_for(method);
    reg.image_to_drb = ct_to_drb_est;
    reg.fre_rms = sample.fre_rms;
    reg.n_points = method == RegistrationMethod::POINT_BASED ? landmarks.size() : default_jig().beads.size();
    wf.record_registration(reg);
    out.fre.push_back(sample.fre_rms);

    std::vector<Probe> probes;
    for (std::size_t p = 0; p < cfg.verification_probes; ++p) {
      const auto& l = landmarks[p % landmarks.size()];
      probes.push_back({probe_in_drb(room, lm_room[p % landmarks.size()], f, mn, ls, rng), l.position});
    }
    if (wf.verify_registration(probes, cfg.verification_threshold_mm).accepted) break;
    ++out.rejections;
    wf.advance("begin_registration");
  }
  wf.advance("start_navigation");

  JointState q = room.robot_home;
  const auto obstacles = room.obstacles_in_base();
  const RigidTransform ct_true_from_drb = ct_to_drb_true.inverse();
  for (std::size_t s = 0; s < plans.size(); ++s) {
    const auto& [id, plan] = plans[s];
    for (int i = 0; i < cfg.imaging.placement_shots; ++i) wf.record_shot(id, ShotPhase::PLACEMENT);

    ScrewPlan guided;
    if (cfg.mode == Mode::ROBOT_ASSISTED) {
      const RigidTransform drb_est = measure(room, room.drb, room.drb_to_room, mn, rng);
      const FrameGraph est = FrameGraph{}
                                 .with_edge(frames::kCtImage, frames::kDrb, ct_to_drb_est)
                                 .with_edge(frames::kDrb, frames::kTracker, drb_est)
                                 .with_edge(frames::kRobotBase, frames::kTracker, room.robot_base_to_tracker());
      AlignOptions opts;
      const Alignment a = align_to_plan(plan, est, ctx.arm, q, obstacles, opts);
      q = a.target;
      wf.record_robot_alignment(id, a.target, a.trajectory.min_clearance);
      const RigidTransform executed = fk(ctx.arm, a.target);
      const RigidTransform base_to_ct = room.truth().resolve(frames::kRobotBase, frames::kCtImage);
      const Vec3 axis = executed.rotation().col(2);
      guided = plan;
      guided.entry = base_to_ct.apply(executed.translation() + opts.standoff * axis);
      guided.direction = base_to_ct.apply_direction(axis).normalized();
      guided = simulate_execution(guided, cfg.robot_execution, rng);
    } else {
      // Tracking error of the navigated instrument held at the planned pose.
      const RigidTransform tool_to_room =
          stylus_pose(room.stylus, room.image_to_room.apply(plan.entry), room.image_to_room.apply_direction(plan.direction));
      const RigidTransform tool_est = measure(room, room.stylus, tool_to_room, mn, rng);
      const RigidTransform drb_est = measure(room, room.drb, room.drb_to_room, mn, rng);
      const RigidTransform rel_est = compose(drb_est.inverse(), tool_est);
      const RigidTransform rel_true = compose(room.drb_to_room.inverse(), tool_to_room);
      const RigidTransform track_err = compose(rel_true, rel_est.inverse());
      guided = moved(plan, compose(ct_true_from_drb, compose(track_err, ct_to_drb_est)));
      guided = simulate_execution(guided, cfg.navigation_execution, rng);
      wf.advance("place_screw");
    }
    if (cfg.mode == Mode::ROBOT_ASSISTED) wf.advance("place_screw");
    wf.advance("begin_verification_imaging");
    for (int i = 0; i < cfg.imaging.verification_shots; ++i) wf.record_shot(id, ShotPhase::VERIFICATION);

    const BreachReport rep = validate_trajectory(guided, v);
    wf.record_screw_result(id, guided, rep);
    wf.advance(s + 1 < plans.size() ? "next_screw" : "complete");

    ScrewRow row;
    row.session = k;
    row.screw_id = id;
    row.level = v.level;
    row.side = plan.side;
    row.registration_fre = out.fre.back();
    row.entry_error_mm = (guided.entry - plan.entry).norm();
    row.angle_error_rad = std::acos(std::clamp(guided.direction.dot(plan.direction), -1.0, 1.0));
    row.report = rep;
    out.rows.push_back(row);
  }
  const auto state = wf.snapshot();
  out.ledger_consistent = state->ledger.consistent();
  out.shots = state->ledger.total();
  out.screws = state->ledger.screw_count();
  out.report = wf.report();
  return out;
}

}  // namespace

CadaverReport run_cadaver_style_study(const StudyConfig& cfg) {
  cfg.validate();
  if (cfg.screws == 0) raise(ErrorKind::InvalidArgument, "screw count must be > 0");
  const CadaverContext ctx(cfg);
  const std::size_t sessions = (cfg.screws + 1) / 2;
  std::vector<SessionOutcome> outcomes(sessions);
  parallel_map(sessions, cfg.threads, [&](std::size_t k) {
    const std::size_t n = std::min<std::size_t>(2, cfg.screws - 2 * k);
    outcomes[k] = run_session(ctx, k, n);
    return 0.0;
  });

  CadaverReport rep;
  rep.config = cfg;
  std::vector<double> fre;
  std::size_t ledger_screws = 0;
  for (auto& o : outcomes) {
    for (auto& r : o.rows) {
      ++rep.grade_counts[static_cast<std::size_t>(r.report.grade)];
      rep.rows.push_back(std::move(r));
    }
    rep.total_shots += o.shots;
    ledger_screws += o.screws;
    rep.ledgers_consistent = rep.ledgers_consistent && o.ledger_consistent;
    rep.registration_rejections += o.rejections;
    fre.insert(fre.end(), o.fre.begin(), o.fre.end());
    rep.session_reports.push_back(std::move(o.report));
  }
  for (std::size_t g = 0; g < 5; ++g) {
    rep.grade_percent[g] = 100.0 * static_cast<double>(rep.grade_counts[g]) / static_cast<double>(rep.rows.size());
  }
  rep.mean_shots_per_screw =
      ledger_screws == 0 ? 0.0 : static_cast<double>(rep.total_shots) / static_cast<double>(ledger_screws);
  if (fre.size() >= 2) rep.registration = summarize(fre);
  return rep;
}

// ---- acceptance bands ---------------------------------------------------

std::vector<BandCheck> check_phantom(const PhantomReport& report) {
  std::vector<BandCheck> out;
  for (const auto& [m, s] : report.methods) {
    const double lo = m == RegistrationMethod::POINT_BASED ? 0.8 : 0.85;
    const double hi = m == RegistrationMethod::POINT_BASED ? 1.2 : 1.25;
    const auto& st = s.stats;
    out.push_back({to_string(m) + " mean in [" + format_fixed6(lo) + ", " + format_fixed6(hi) + "] mm",
                   st.mean >= lo && st.mean <= hi, "mean " + format_fixed6(st.mean)});
    out.push_back({to_string(m) + " mean + 2 sd <= 2 mm", st.mean_plus_2sd <= 2.0,
                   "mean + 2 sd " + format_fixed6(st.mean_plus_2sd)});
  }
  return out;
}

std::vector<BandCheck> check_cadaver(const CadaverReport& report) {
  std::vector<BandCheck> out;
  const double a = report.grade_percent[0];
  const double ab = a + report.grade_percent[1];
  const std::string detail = "A " + format_fixed6(a) + "%, A+B " + format_fixed6(ab) + "%";
  if (report.config.mode == Mode::ROBOT_ASSISTED) {
    out.push_back({"robot-assisted grade A >= 85%", a >= 85.0, detail});
    out.push_back({"robot-assisted grade A+B >= 95%", ab >= 95.0, detail});
  } else {
    out.push_back({"navigation-guided grade A+B >= 90%", ab >= 90.0, detail});
  }
  const double policy = report.config.imaging.placement_shots + report.config.imaging.verification_shots;
  out.push_back({"mean shots per screw equals the imaging policy", report.mean_shots_per_screw == policy,
                 "mean " + format_fixed6(report.mean_shots_per_screw)});
  out.push_back({"radiation ledgers consistent", report.ledgers_consistent, ""});
  return out;
}

}  // namespace igss
