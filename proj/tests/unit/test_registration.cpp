#include "support.hpp"

#include <algorithm>
#include <cmath>

#include "igss/registration.hpp"

using namespace igss;
using igss::test::check_raises;

namespace {

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

}  // namespace

TEST_CASE("noiseless fit recovers the transform") {
  Rng rng(test::kSeed);
  for (int i = 0; i < 300; ++i) {
    const RigidTransform truth = rng.rigid_transform(500.0);
    const auto pts = random_cloud(rng, 3 + rng.index(8), 60.0);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(truth.apply(p));
    const auto r = fit_rigid(make_set(moved, frames::kDrb), make_set(pts, frames::kCtImage));
    CHECK(r.fre_rms < 1e-9);
    CHECK(test::near(r.transform, truth, 1e-9));
    CHECK(r.transform.rotation().determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("correspondence is by label, not by order") {
  Rng rng(test::kSeed + 1);
  const RigidTransform truth = rng.rigid_transform(100.0);
  const auto pts = random_cloud(rng, 6, 40.0);
  FiducialSet moving = make_set(pts, frames::kCtImage), fixed{{}, frames::kDrb};
  for (const auto& f : moving.points) fixed.points.push_back({f.label, truth.apply(f.position)});
  std::reverse(fixed.points.begin(), fixed.points.end());
  const auto r = fit_rigid(fixed, moving);
  CHECK(test::near(r.transform, truth, 1e-9));
  CHECK(r.labels.size() == 6);
  CHECK(r.per_point_residuals.size() == 6);
}

TEST_CASE("mirrored configurations never produce a reflection") {
  Rng rng(test::kSeed + 2);
  for (int i = 0; i < 50; ++i) {
    const auto pts = random_cloud(rng, 5, 30.0);
    std::vector<Vec3> mirrored;
    for (const auto& p : pts) mirrored.emplace_back(-p.x(), p.y(), p.z());
    const RigidTransform t = fit_rigid_points(mirrored, pts);
    CHECK(t.rotation().determinant() > 0.0);
  }
}

TEST_CASE("degenerate fiducial sets are rejected") {
  const auto two = make_set({Vec3(0, 0, 0), Vec3(1, 0, 0)}, frames::kCtImage);
  check_raises(ErrorKind::DegenerateConfiguration, [&] { (void)fit_rigid(two, two); });
  const auto line = make_set({Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(20, 0, 0), Vec3(35, 0, 0)}, frames::kCtImage);
  check_raises(ErrorKind::DegenerateConfiguration, [&] { (void)fit_rigid(line, line); });
  FiducialSet dup = make_set({Vec3(0, 0, 0), Vec3(10, 0, 0), Vec3(0, 10, 0)}, frames::kCtImage);
  dup.points[2].label = "F0";
  check_raises(ErrorKind::InvalidArgument, [&] { validate_fiducials(dup); });
}

TEST_CASE("expected FRE follows 1 - 2/N") {
  Rng rng(test::kSeed + 3);
  const double fle = 1.0, sigma = fle / std::sqrt(3.0);
  for (std::size_t n : {4u, 6u, 10u}) {
    const auto pts = random_cloud(rng, n, 50.0);
    const auto moving = make_set(pts, frames::kCtImage);
    double sum = 0.0;
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
      FiducialSet fixed = moving;
      for (auto& f : fixed.points) f.position += rng.normal_vec3(sigma);
      const double fre = fit_rigid(fixed, moving).fre_rms;
      sum += fre * fre;
    }
    const double ratio = sum / trials / (fle * fle);
    CHECK(ratio == doctest::Approx(1.0 - 2.0 / static_cast<double>(n)).epsilon(0.03));
    CHECK(predict_fre_rms(n, fle) == doctest::Approx(std::sqrt(1.0 - 2.0 / static_cast<double>(n))));
  }
}

TEST_CASE("TRE prediction matches simulation away from the centroid") {
  Rng rng(test::kSeed + 4);
  const double fle = 0.8, sigma = fle / std::sqrt(3.0);
  const auto config = make_set({Vec3(-40, -20, 0), Vec3(35, -25, 5), Vec3(0, 45, -5), Vec3(10, 0, 30)},
                               frames::kCtImage);
  const Vec3 target(20.0, 60.0, 80.0);
  double sum = 0.0;
  const int trials = 20000;
  for (int t = 0; t < trials; ++t) {
    FiducialSet fixed = config;
    for (auto& f : fixed.points) f.position += rng.normal_vec3(sigma);
    sum += (fit_rigid(fixed, config).transform.apply(target) - target).squaredNorm();
  }
  const double mc = std::sqrt(sum / trials);
  const auto pred = predict_tre_rms(config, target, fle);
  CHECK(mc == doctest::Approx(pred.expected_tre_rms).epsilon(0.05));

  const Vec3 centroid = (Vec3(-40, -20, 0) + Vec3(35, -25, 5) + Vec3(0, 45, -5) + Vec3(10, 0, 30)) / 4.0;
  CHECK(predict_tre_rms(config, centroid, fle).expected_tre_rms == doctest::Approx(fle / 2.0).epsilon(1e-9));
}

TEST_CASE("summary statistics") {
  const auto s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.n == 4);
  CHECK(s.mean == doctest::Approx(2.5));
  CHECK(s.sd == doctest::Approx(1.2909944487));
  CHECK(s.mean_plus_1sd == doctest::Approx(2.5 + s.sd));
  CHECK(s.mean_plus_196sd == doctest::Approx(2.5 + 1.96 * s.sd));
  CHECK(s.mean_plus_2sd == doctest::Approx(2.5 + 2.0 * s.sd));
  check_raises(ErrorKind::InsufficientData, [] { (void)summarize({1.0}); });
}

TEST_CASE("collinearity test is relative to the spread") {
  CHECK(is_collinear({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)}));
  CHECK_FALSE(is_collinear({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}));
  CHECK(is_collinear({Vec3(0, 0, 0), Vec3(1000, 0, 0), Vec3(2000, 1e-7, 0)}));
}
