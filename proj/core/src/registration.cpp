#include "igss/registration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "igss/error.hpp"

namespace igss {

namespace {

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

}  // namespace

const Fiducial* FiducialSet::find(const std::string& label) const {
  for (const auto& f : points) {
    if (f.label == label) return &f;
  }
  return nullptr;
}

Vec3 centered_singular_values(const std::vector<Vec3>& points) {
  if (points.empty()) return Vec3::Zero();
  const Vec3 c = centroid(points);
  Eigen::MatrixXd m(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) m.row(i) = (points[i] - c).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  Vec3 s = Vec3::Zero();
  const auto& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(3, sv.size()); ++i) s(i) = sv(i);
  return s;
}

bool is_collinear(const std::vector<Vec3>& points, double ratio) {
  if (points.size() < 3) return true;
  const Vec3 s = centered_singular_values(points);
  return s(0) <= 0.0 || s(1) < ratio * s(0);
}

void validate_fiducials(const FiducialSet& set) {
  if (set.points.size() < 3) {
    raise(ErrorKind::DegenerateConfiguration, "rigid fit needs >= 3 fiducials, got " +
                                                  std::to_string(set.points.size()));
  }
  std::set<std::string> labels;
  std::vector<Vec3> pts;
  for (const auto& f : set.points) {
    if (!labels.insert(f.label).second) raise(ErrorKind::InvalidArgument, "duplicate label " + f.label);
    if (!f.position.allFinite()) raise(ErrorKind::InvalidArgument, "non-finite fiducial " + f.label);
    pts.push_back(f.position);
  }
  if (is_collinear(pts)) raise(ErrorKind::DegenerateConfiguration, "fiducials are collinear");
}

RigidTransform fit_rigid_points(const std::vector<Vec3>& fixed, const std::vector<Vec3>& moving) {
  if (fixed.size() != moving.size() || fixed.size() < 3) {
    raise(ErrorKind::DegenerateConfiguration, "need >= 3 paired points");
  }
  if (is_collinear(fixed) || is_collinear(moving)) {
    raise(ErrorKind::DegenerateConfiguration, "paired points are collinear");
  }
  const Vec3 cf = centroid(fixed);
  const Vec3 cm = centroid(moving);
  Mat3 h = Mat3::Zero();  // cross-covariance  sum (m - cm)(f - cf)^T
  for (std::size_t i = 0; i < fixed.size(); ++i) h += (moving[i] - cm) * (fixed[i] - cf).transpose();

  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  if ((v * u.transpose()).determinant() < 0.0) d(2, 2) = -1.0;  // reflection branch
  const Mat3 r = v * d * u.transpose();
  return {r, cf - r * cm};
}

RegistrationResult fit_rigid(const FiducialSet& fixed, const FiducialSet& moving) {
  validate_fiducials(fixed);
  validate_fiducials(moving);
  if (fixed.size() != moving.size()) {
    raise(ErrorKind::LabelMismatch, "fiducial counts differ (" + std::to_string(fixed.size()) + " vs " +
                                        std::to_string(moving.size()) + ")");
  }
  // Pair in the fixed set's order; the solver is order-invariant so this only
  // fixes the residual ordering.
  std::vector<Vec3> f, m;
  std::vector<std::string> labels;
  for (const auto& fp : fixed.points) {
    const Fiducial* mp = moving.find(fp.label);
    if (mp == nullptr) raise(ErrorKind::LabelMismatch, "label " + fp.label + " missing from moving set");
    f.push_back(fp.position);
    m.push_back(mp->position);
    labels.push_back(fp.label);
  }

  RegistrationResult out;
  out.transform = fit_rigid_points(f, m);
  out.labels = std::move(labels);
  out.n_points = f.size();
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = (f[i] - out.transform.apply(m[i])).norm();
    out.per_point_residuals.push_back(r);
    sum_sq += r * r;
  }
  out.fre_rms = std::sqrt(sum_sq / static_cast<double>(f.size()));
  return out;
}

double predict_fre_rms(std::size_t n, double fle_rms) {
  if (n < 3) raise(ErrorKind::InvalidN, "n must be >= 3");
  if (fle_rms < 0.0) raise(ErrorKind::InvalidArgument, "fle_rms must be >= 0");
  return fle_rms * std::sqrt(1.0 - 2.0 / static_cast<double>(n));
}

TrePrediction predict_tre_rms(const FiducialSet& config, const Vec3& target, double fle_rms) {
  validate_fiducials(config);
  if (fle_rms < 0.0) raise(ErrorKind::InvalidArgument, "fle_rms must be >= 0");

  std::vector<Vec3> pts;
  for (const auto& f : config.points) pts.push_back(f.position);
  const Vec3 c = centroid(pts);
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Mat3 axes = eig.eigenvectors();

  TrePrediction out;
  out.fle_rms = fle_rms;
  const Vec3 r = target - c;
  double sum_ratio = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Vec3 axis = axes.col(k);
    double f2 = 0.0;
    for (const auto& p : pts) {
      const Vec3 q = p - c;
      f2 += (q - q.dot(axis) * axis).squaredNorm();
    }
    f2 /= static_cast<double>(pts.size());
    const double d2 = (r - r.dot(axis) * axis).squaredNorm();
    if (f2 <= 0.0) raise(ErrorKind::DegenerateConfiguration, "zero fiducial spread about an axis");
    out.principal_axis_spreads[k] = std::sqrt(f2);
    out.target_axis_distances[k] = std::sqrt(d2);
    sum_ratio += d2 / f2;
  }
  const double n = static_cast<double>(pts.size());
  out.expected_tre_rms = std::sqrt(fle_rms * fle_rms / n * (1.0 + sum_ratio / 3.0));
  return out;
}

StudyStats summarize(const std::vector<double>& values) {
  if (values.size() < 2) raise(ErrorKind::InsufficientData, "need >= 2 values for statistics");
  StudyStats s;
  s.n = values.size();
  // Sorted summation keeps the result independent of input order.
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : sorted) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  s.mean_plus_1sd = s.mean + s.sd;
  s.mean_plus_196sd = s.mean + 1.96 * s.sd;
  s.mean_plus_2sd = s.mean + 2.0 * s.sd;
  return s;
}

StudyStats rmse_report(const std::vector<RegistrationResult>& results) {
  std::vector<double> v;
  v.reserve(results.size());
  for (const auto& r : results) v.push_back(r.fre_rms);
  return summarize(v);
}

}  // namespace igss
