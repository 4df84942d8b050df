// Rigid point-based registration with fiducial/target error statistics.
//
// Error model assumed by the predictors: zero-mean isotropic Gaussian
// fiducial localization error with RMS magnitude `fle_rms` (per-axis
// sigma = fle_rms / sqrt(3)).
#pragma once

#include <array>
#include <string>
#include <vector>

#include "igss/frame_graph.hpp"
#include "igss/geometry.hpp"

namespace igss {

struct Fiducial {
  std::string label;
  Vec3 position;  // mm
};

struct FiducialSet {
  std::vector<Fiducial> points;
  FrameId frame;

  std::size_t size() const { return points.size(); }
  const Fiducial* find(const std::string& label) const;
};

// Singular values of the centered point matrix, descending.
Vec3 centered_singular_values(const std::vector<Vec3>& points);

// Rank-1 (or worse) point cloud: second singular value below
// `ratio` times the largest.
bool is_collinear(const std::vector<Vec3>& points, double ratio = 1e-6);

// Throws DegenerateConfiguration (fewer than 3 points or collinear) or
// InvalidArgument (duplicate labels).
void validate_fiducials(const FiducialSet& set);

struct RegistrationResult {
  RigidTransform transform;  // moving frame -> fixed frame
  double fre_rms = 0.0;      // mm
  std::vector<double> per_point_residuals;  // mm, ordered like `labels`
  std::vector<std::string> labels;
  std::size_t n_points = 0;
};

// Least-squares rigid fit: minimizes sum |fixed_i - T(moving_i)|^2 over SE(3)
// with correspondences by label. Never returns a reflection.
RegistrationResult fit_rigid(const FiducialSet& fixed, const FiducialSet& moving);

// Same solver over already-paired point lists (fixed[i] <-> moving[i]).
RigidTransform fit_rigid_points(const std::vector<Vec3>& fixed, const std::vector<Vec3>& moving);

// Expected RMS fiducial registration error: fle_rms * sqrt(1 - 2/n).
double predict_fre_rms(std::size_t n, double fle_rms);

struct TrePrediction {
  double expected_tre_rms = 0.0;          // mm at the target
  double fle_rms = 0.0;                   // mm
  std::array<double, 3> principal_axis_spreads{};  // f_k, mm
  std::array<double, 3> target_axis_distances{};   // d_k, mm
};

// Expected RMS target registration error at `target` (same frame as the
// configuration):  TRE^2 = FLE^2/N * (1 + 1/3 * sum_k d_k^2 / f_k^2),
// with d_k the target's distance from principal axis k and f_k the RMS
// distance of the fiducials from that axis.
TrePrediction predict_tre_rms(const FiducialSet& config, const Vec3& target, double fle_rms);

struct StudyStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  double mean_plus_1sd = 0.0;
  double mean_plus_196sd = 0.0;
  double mean_plus_2sd = 0.0;
};

StudyStats summarize(const std::vector<double>& values);
StudyStats rmse_report(const std::vector<RegistrationResult>& results);

}  // namespace igss
