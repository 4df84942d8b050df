#include "igss/carm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "igss/error.hpp"

namespace igss {

bool CArmModel::inside_detector(double u, double v) const {
  return u >= 0.0 && v >= 0.0 && u <= static_cast<double>(detector_width) &&
         v <= static_cast<double>(detector_height);
}

void CArmModel::validate() const {
  if (!(source_detector_distance > 0.0)) raise(ErrorKind::InvalidArgument, "source_detector_distance must be > 0");
  if (!(pixel_pitch > 0.0)) raise(ErrorKind::InvalidArgument, "pixel_pitch must be > 0");
  if (detector_width <= 0 || detector_height <= 0) raise(ErrorKind::InvalidArgument, "detector size must be > 0");
  if (!inside_detector(principal_u, principal_v)) raise(ErrorKind::InvalidArgument, "principal point off detector");
}

RigidTransform carm_pose_looking_at(const Vec3& isocenter, const Vec3& view_direction, double source_to_isocenter,
                                    const Vec3& up_hint) {
  const Vec3 z = view_direction.normalized();
  const Vec3 x_raw = up_hint.cross(z);
  if (x_raw.norm() < 1e-9) raise(ErrorKind::InvalidArgument, "up hint parallel to view direction");
  const Vec3 x = x_raw.normalized();
  const Vec3 y = z.cross(x);
  const Vec3 source = isocenter - source_to_isocenter * z;
  Mat3 cam_to_world;
  cam_to_world.col(0) = x;
  cam_to_world.col(1) = y;
  cam_to_world.col(2) = z;
  return RigidTransform(cam_to_world, source).inverse();
}

namespace {

constexpr double kMinDepthMm = 1.0;

PixelPoint project_camera_point(const CArmModel& carm, const Vec3& pc) {
  const double f = carm.focal_pixels();
  return {carm.principal_u + f * pc.x() / pc.z(), carm.principal_v + f * pc.y() / pc.z()};
}

}  // namespace

std::vector<PixelPoint> project(const CArmModel& carm, const std::vector<Vec3>& points_world) {
  std::vector<PixelPoint> out;
  out.reserve(points_world.size());
  for (const auto& p : points_world) {
    const Vec3 pc = carm.pose.apply(p);
    if (pc.z() <= kMinDepthMm) raise(ErrorKind::BehindSource, "point at camera depth <= 1 mm");
    out.push_back(project_camera_point(carm, pc));
  }
  return out;
}

Vec3 pixel_ray(const CArmModel& carm, double u, double v) {
  const double f = carm.focal_pixels();
  return Vec3((u - carm.principal_u) / f, (v - carm.principal_v) / f, 1.0);
}

std::vector<Vec3> CalibrationJig::bead_positions() const {
  std::vector<Vec3> out;
  for (const auto& b : beads) out.push_back(b.position);
  return out;
}

bool has_out_of_plane_point(const std::vector<Vec3>& points, double min_offset) {
  if (points.size() < 4) return false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::vector<Vec3> others;
    for (std::size_t j = 0; j < points.size(); ++j) {
      if (j != i) others.push_back(points[j]);
    }
    Vec3 c = Vec3::Zero();
    for (const auto& p : others) c += p;
    c /= static_cast<double>(others.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : others) cov += (p - c) * (p - c).transpose();
    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 normal = eig.eigenvectors().col(0);  // smallest eigenvalue
    if (std::abs((points[i] - c).dot(normal)) > min_offset) return true;
  }
  return false;
}

void validate_jig(const CalibrationJig& jig) {
  if (jig.beads.size() < 6) raise(ErrorKind::DegenerateBeads, "jig needs >= 6 beads");
  const auto pts = jig.bead_positions();
  if (!has_out_of_plane_point(pts)) raise(ErrorKind::DegenerateBeads, "jig beads are coplanar");
  std::vector<double> d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) d.push_back((pts[i] - pts[j]).norm());
  }
  std::sort(d.begin(), d.end());
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] - d[i - 1] <= 1.0) raise(ErrorKind::DegenerateBeads, "jig pairwise bead distances not distinct");
  }
  std::set<std::string> labels;
  for (const auto& b : jig.beads) {
    if (!labels.insert(b.label).second) raise(ErrorKind::DegenerateBeads, "duplicate bead label " + b.label);
  }
}

CalibrationJig default_jig() {
  CalibrationJig jig;
  jig.beads = {
      {"B1", Vec3(-41.0, -39.0, -30.0)}, {"B2", Vec3(37.0, -45.0, -22.0)}, {"B3", Vec3(-31.0, 48.0, -36.0)},
      {"B4", Vec3(47.0, 40.0, -13.0)},   {"B5", Vec3(-8.0, -19.0, 26.0)},  {"B6", Vec3(-47.0, 19.0, 41.0)},
      {"B7", Vec3(27.0, 0.0, 36.0)},     {"B8", Vec3(10.0, 39.0, 23.0)},
  };
  jig.tracker_markers = default_jig_markers();
  for (auto& m : jig.tracker_markers.markers) m += Vec3(-36.0, -45.0, 80.0);
  return jig;
}

std::string to_string(ViewTag tag) {
  switch (tag) {
    case ViewTag::AP: return "AP";
    case ViewTag::LATERAL: return "LATERAL";
    case ViewTag::OTHER: return "OTHER";
  }
  return "OTHER";
}

ViewTag view_tag_from_string(const std::string& s) {
  if (s == "AP") return ViewTag::AP;
  if (s == "LATERAL") return ViewTag::LATERAL;
  if (s == "OTHER") return ViewTag::OTHER;
  raise(ErrorKind::ParseError, "unknown view tag " + s);
}

ProjectionImage acquire_shot(const JigScene& scene, const CArmModel& carm, double noise_px, Rng& rng,
                             ShotCounter& counter, ViewTag view) {
  if (scene.jig == nullptr) raise(ErrorKind::InvalidArgument, "scene has no jig");
  carm.validate();
  ProjectionImage img;
  img.carm = carm;
  img.view_tag = view;
  for (const auto& b : scene.jig->beads) {
    const Vec3 pc = carm.pose.apply(scene.jig_to_world.apply(b.position));
    // Noise is drawn for every bead so visibility never shifts the stream.
    const double nu = rng.normal(), nv = rng.normal();
    if (pc.z() <= kMinDepthMm) continue;
    const PixelPoint p = project_camera_point(carm, pc);
    const double u = p.u + noise_px * nu;
    const double v = p.v + noise_px * nv;
    if (!carm.inside_detector(u, v)) continue;
    img.detections.push_back({b.label, u, v});
  }
  img.shot_index = counter.next();
  return img;
}

std::vector<Detection> identify_beads(const std::vector<PixelPoint>& detections, const CalibrationJig& jig,
                                      const CArmModel& carm_guess, const IdentifyOptions& options) {
  if (detections.size() < 6) raise(ErrorKind::TooFewDetections, "need >= 6 detections");

  // Predicted bead positions under the guess (beads behind the source are skipped).
  struct Predicted {
    std::size_t bead;
    PixelPoint p;
  };
  std::vector<Predicted> pred;
  for (std::size_t b = 0; b < jig.beads.size(); ++b) {
    const Vec3 pc = carm_guess.pose.apply(jig.beads[b].position);
    if (pc.z() > kMinDepthMm) pred.push_back({b, project_camera_point(carm_guess, pc)});
  }
  const std::size_t np = pred.size(), nd = detections.size();
  auto cost = [&](std::size_t i, std::size_t j) {
    return std::hypot(pred[i].p.u - detections[j].u, pred[i].p.v - detections[j].v);
  };

  // Greedy assignment in ascending distance order within the gate.
  struct Pair {
    double c;
    std::size_t i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < nd; ++j) {
      const double c = cost(i, j);
      if (c <= options.gate_px) pairs.push_back({c, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return a.c != b.c ? a.c < b.c : (a.i != b.i ? a.i < b.i : a.j < b.j);
  });
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> det_of(np, kNone), pred_of(nd, kNone);
  for (const auto& p : pairs) {
    if (det_of[p.i] != kNone || pred_of[p.j] != kNone) continue;
    det_of[p.i] = p.j;
    pred_of[p.j] = p.i;
  }

  // Runner-up check: cheapest single replacement or pairwise swap.
  const double inf = std::numeric_limits<double>::infinity();
  double best_delta = inf;
  for (std::size_t i = 0; i < np; ++i) {
    if (det_of[i] == kNone) continue;
    const double ci = cost(i, det_of[i]);
    for (std::size_t j = 0; j < nd; ++j) {
      if (pred_of[j] == kNone) {
        const double c = cost(i, j);
        if (c <= options.gate_px) best_delta = std::min(best_delta, c - ci);
      }
    }
    for (std::size_t k = i + 1; k < np; ++k) {
      if (det_of[k] == kNone) continue;
      const double swapped = cost(i, det_of[k]) + cost(k, det_of[i]);
      if (cost(i, det_of[k]) <= options.gate_px && cost(k, det_of[i]) <= options.gate_px) {
        best_delta = std::min(best_delta, swapped - ci - cost(k, det_of[k]));
      }
    }
  }
  if (best_delta < options.ambiguity_px) {
    raise(ErrorKind::AmbiguousMatch, "runner-up assignment within " + std::to_string(best_delta) + " px");
  }

  // Pairwise-distance signature: a correct label keeps its image distances to
  // the other matches close to the predicted ones.
  std::vector<std::size_t> matched;
  for (std::size_t i = 0; i < np; ++i) {
    if (det_of[i] != kNone) matched.push_back(i);
  }
  std::vector<Detection> out;
  for (std::size_t a : matched) {
    std::vector<double> err;
    for (std::size_t b : matched) {
      if (a == b) continue;
      const double dp = std::hypot(pred[a].p.u - pred[b].p.u, pred[a].p.v - pred[b].p.v);
      const auto& da = detections[det_of[a]];
      const auto& db = detections[det_of[b]];
      err.push_back(std::abs(dp - std::hypot(da.u - db.u, da.v - db.v)));
    }
    std::nth_element(err.begin(), err.begin() + static_cast<std::ptrdiff_t>(err.size() / 2), err.end());
    if (!err.empty() && err[err.size() / 2] > options.gate_px) continue;
    const auto& d = detections[det_of[a]];
    out.push_back({jig.beads[pred[a].bead].label, d.u, d.v});
  }
  if (out.size() < 6) raise(ErrorKind::TooFewDetections, "only " + std::to_string(out.size()) + " beads identified");
  std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) { return a.label < b.label; });
  return out;
}

namespace {

// Normalized image coordinates x/z, y/z.
Eigen::Vector2d normalized_coords(const CArmModel& carm, const Detection& d) {
  const double f = carm.focal_pixels();
  return {(d.u - carm.principal_u) / f, (d.v - carm.principal_v) / f};
}

RigidTransform direct_linear_pose(const std::vector<Vec3>& pts, const std::vector<Eigen::Vector2d>& xy) {
  // Condition the 3D points (centroid at origin, mean distance sqrt(3)).
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - c).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = std::sqrt(3.0) / mean_dist;

  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec3 q = (pts[static_cast<std::size_t>(i)] - c) * s;
    const double x = xy[static_cast<std::size_t>(i)].x(), y = xy[static_cast<std::size_t>(i)].y();
    Eigen::Matrix<double, 1, 4> qh(q.x(), q.y(), q.z(), 1.0);
    a.block<1, 4>(2 * i, 0) = qh;
    a.block<1, 4>(2 * i, 8) = -x * qh;
    a.block<1, 4>(2 * i + 1, 4) = qh;
    a.block<1, 4>(2 * i + 1, 8) = -y * qh;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> p;
  p << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8), h(9), h(10), h(11);

  // Undo conditioning: P_world = P_cond * [sI, -s c; 0 1].
  Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
  t.topLeftCorner<3, 3>() *= s;
  t.topRightCorner<3, 1>() = -s * c;
  p = p * t;

  Mat3 m = p.leftCols<3>();
  if (m.determinant() < 0.0) p = -p;
  m = p.leftCols<3>();
  Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = msvd.singularValues().mean();
  const Mat3 r = msvd.matrixU() * msvd.matrixV().transpose();
  const Vec3 trans = p.col(3) / scale;
  return {r, trans};
}

}  // namespace

PoseCalibration calibrate_pose(const ProjectionImage& image, const CalibrationJig& jig,
                               const CalibrateOptions& options) {
  const CArmModel& carm = image.carm;
  std::vector<Vec3> pts;
  std::vector<Eigen::Vector2d> xy;
  std::vector<Detection> used;
  for (const auto& d : image.detections) {
    const auto it = std::find_if(jig.beads.begin(), jig.beads.end(), [&](const Fiducial& b) { return b.label == d.label; });
    if (it == jig.beads.end()) continue;
    pts.push_back(it->position);
    xy.push_back(normalized_coords(carm, d));
    used.push_back(d);
  }
  if (pts.size() < 6) raise(ErrorKind::DegenerateBeads, "need >= 6 labeled bead detections");
  if (!has_out_of_plane_point(pts)) raise(ErrorKind::DegenerateBeads, "detected beads are coplanar");

  RigidTransform pose = direct_linear_pose(pts, xy);

  const double f = carm.focal_pixels();
  const auto n = static_cast<Eigen::Index>(pts.size());
  auto residuals = [&](const RigidTransform& T, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    r.resize(2 * n);
    if (jac) jac->resize(2 * n, 6);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 pc = T.apply(pts[static_cast<std::size_t>(i)]);
      const double z = pc.z();
      const auto& d = used[static_cast<std::size_t>(i)];
      r(2 * i) = carm.principal_u + f * pc.x() / z - d.u;
      r(2 * i + 1) = carm.principal_v + f * pc.y() / z - d.v;
      if (jac) {
        Eigen::Matrix<double, 2, 3> dproj;
        dproj << f / z, 0.0, -f * pc.x() / (z * z), 0.0, f / z, -f * pc.y() / (z * z);
        Mat3 neg_skew;
        neg_skew << 0.0, pc.z(), -pc.y(), -pc.z(), 0.0, pc.x(), pc.y(), -pc.x(), 0.0;
        jac->block<2, 3>(2 * i, 0) = dproj * neg_skew;  // left rotation increment
        jac->block<2, 3>(2 * i, 3) = dproj;             // translation increment
      }
    }
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  residuals(pose, r, &jac);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  int it = 0;
  bool converged = false;
  for (; it < options.max_iterations; ++it) {
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> g = jac.transpose() * r;
    Eigen::Matrix<double, 6, 6> lhs = jtj;
    lhs.diagonal() += lambda * jtj.diagonal();
    const Eigen::Matrix<double, 6, 1> step = -lhs.ldlt().solve(g);
    const RigidTransform candidate =
        compose(RigidTransform::from_rotation_vector(step.head<3>(), step.tail<3>()), pose);
    Eigen::VectorXd rc;
    residuals(candidate, rc, nullptr);
    const double cand_cost = rc.squaredNorm();
    if (cand_cost <= cost) {
      const double gain = cost - cand_cost;
      pose = candidate;
      residuals(pose, r, &jac);
      cost = cand_cost;
      lambda = std::max(lambda / 3.0, 1e-12);
      if (step.head<3>().norm() < 1e-12 && step.tail<3>().norm() < 1e-9) { converged = true; break; }
      if (gain <= 1e-15 * std::max(1.0, cost)) { converged = true; break; }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) { converged = true; break; }  // no further descent possible
    }
  }

  PoseCalibration out;
  out.jig_to_camera = pose;
  out.iterations = it;
  out.n_beads = pts.size();
  out.residual_rms_px = std::sqrt(cost / static_cast<double>(n));
  if (!converged) raise(ErrorKind::NonConvergence, "pose refinement hit the iteration limit");
  if (out.residual_rms_px > options.max_residual_px) {
    raise(ErrorKind::NonConvergence, "reprojection residual " + std::to_string(out.residual_rms_px) + " px");
  }
  return out;
}

Vec3 triangulate_midpoint(const Vec3& origin_a, const Vec3& dir_a, const Vec3& origin_b, const Vec3& dir_b) {
  const Vec3 w0 = origin_a - origin_b;
  const double a = dir_a.dot(dir_a), b = dir_a.dot(dir_b), c = dir_b.dot(dir_b);
  const double d = dir_a.dot(w0), e = dir_b.dot(w0);
  const double denom = a * c - b * b;
  if (denom <= 1e-12 * a * c) raise(ErrorKind::IllConditioned, "rays are parallel");
  const double sa = (b * e - c * d) / denom;
  const double sb = (a * e - b * d) / denom;
  return 0.5 * ((origin_a + sa * dir_a) + (origin_b + sb * dir_b));
}

TwoViewRegistration register_patient_2d(const TrackedProjection& ap, const TrackedProjection& lat,
                                        const CalibrationJig& jig, const TwoViewOptions& options) {
  TwoViewRegistration out;
  // Viewing directions are compared in the DRB frame.
  const RigidTransform jig_to_drb_ap = ap.frames.resolve(frames::kJig, frames::kDrb);
  const RigidTransform jig_to_drb_lat = lat.frames.resolve(frames::kJig, frames::kDrb);

  out.ap_calibration = calibrate_pose(ap.image, jig, options.calibration);
  out.lat_calibration = calibrate_pose(lat.image, jig, options.calibration);

  const RigidTransform ap_cam_to_drb = compose(jig_to_drb_ap, out.ap_calibration.jig_to_camera.inverse());
  const RigidTransform lat_cam_to_drb = compose(jig_to_drb_lat, out.lat_calibration.jig_to_camera.inverse());
  const Vec3 z_ap = ap_cam_to_drb.rotation().col(2);
  const Vec3 z_lat = lat_cam_to_drb.rotation().col(2);
  out.view_separation_rad = std::acos(std::clamp(z_ap.dot(z_lat), -1.0, 1.0));
  if (out.view_separation_rad < options.min_view_separation_rad) {
    raise(ErrorKind::ViewsTooClose, "views separated by " + std::to_string(rad_to_deg(out.view_separation_rad)) +
                                        " deg");
  }

  // Image space = AP camera frame.
  const RigidTransform lat_to_image = compose(ap_cam_to_drb.inverse(), lat_cam_to_drb);
  out.lat_to_image = lat_to_image;
  std::map<std::string, Vec3> ap_rays, lat_rays;
  for (const auto& d : ap.image.detections) ap_rays[d.label] = pixel_ray(ap.image.carm, d.u, d.v);
  for (const auto& d : lat.image.detections) lat_rays[d.label] = pixel_ray(lat.image.carm, d.u, d.v);

  FiducialSet patient;
  patient.frame = frames::kDrb;
  out.triangulated.frame = frames::kCarmAp;
  for (const auto& bead : jig.beads) {
    const auto a = ap_rays.find(bead.label);
    const auto l = lat_rays.find(bead.label);
    if (a == ap_rays.end() || l == lat_rays.end()) continue;
    const Vec3 p = triangulate_midpoint(Vec3::Zero(), a->second, lat_to_image.translation(),
                                        lat_to_image.apply_direction(l->second));
    out.triangulated.points.push_back({bead.label, p});
    patient.points.push_back({bead.label, jig_to_drb_ap.apply(bead.position)});
  }
  out.registration = fit_rigid(patient, out.triangulated);
  return out;
}

Vec3 reconstruct_point(const TwoViewRegistration& reg, const CArmModel& ap, const CArmModel& lat,
                       const PixelPoint& ap_px, const PixelPoint& lat_px) {
  return triangulate_midpoint(Vec3::Zero(), pixel_ray(ap, ap_px.u, ap_px.v), reg.lat_to_image.translation(),
                              reg.lat_to_image.apply_direction(pixel_ray(lat, lat_px.u, lat_px.v)));
}

}  // namespace igss
