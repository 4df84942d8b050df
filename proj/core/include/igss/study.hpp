// Experiment runner: phantom registration-accuracy study, cadaver-style screw
// placement study and calibration of the dominant noise scale against a
// target mean RMSE.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "igss/planning.hpp"
#include "igss/registration.hpp"
#include "igss/scene.hpp"
#include "igss/workflow.hpp"

namespace igss {

enum class RegistrationMethod { POINT_BASED, AUTOMATIC_2D };
std::string to_string(RegistrationMethod m);
RegistrationMethod registration_method_from_string(const std::string& s);
Modality modality_for(RegistrationMethod m);

// Noise at scale 1. The per-method scale multiplies the method's dominant
// term: anatomical landmark localization for point-based registration, bead
// detection in the image for 2D registration. Tracker noise is shared
// hardware and grows linearly with tracker distance. Landmark localization
// additionally scales with the user-group multiplier and with
// 1 + angle_gain * (1 / cos(tool angle) - 1); pixel noise with the group.
struct NoiseModel {
  double tracker_sigma_mm = 0.05;  // per marker, lateral, at the reference distance
  double tracker_depth_factor = 3.0;
  double reference_distance_mm = 1000.0;
  double landmark_sigma_mm = 0.4;  // isotropic, per axis
  double pixel_sigma = 3.0;        // px
  double angle_gain = 0.5;
  // Frozen output of calibrate_noise (targets 0.99 / 1.04 mm, default seed).
  std::map<RegistrationMethod, double> scale{{RegistrationMethod::POINT_BASED, 1.0109},
                                             {RegistrationMethod::AUTOMATIC_2D, 1.0753}};
};

struct ImagingPolicy {
  int placement_shots = 1;
  int verification_shots = 2;
};

struct StudyConfig {
  std::vector<RegistrationMethod> methods{RegistrationMethod::POINT_BASED, RegistrationMethod::AUTOMATIC_2D};
  std::size_t samples = 150;
  std::vector<double> group_multipliers{0.85, 1.0, 1.15};
  std::vector<double> tool_angles_deg{0.0, 30.0, 60.0};
  std::vector<double> tracker_distances_mm{1200.0, 1500.0, 1800.0};
  std::vector<double> detector_distances_mm{250.0, 350.0, 450.0};
  std::uint64_t seed = 20240501;
  NoiseModel noise;
  int threads = 1;

  // Cadaver-style placement.
  Mode mode = Mode::ROBOT_ASSISTED;
  RegistrationMethod cadaver_method = RegistrationMethod::AUTOMATIC_2D;
  Technique technique = Technique::MIS;
  std::size_t screws = 150;
  std::vector<std::string> levels{"T11", "T12", "L1", "L2", "L3", "L4", "L5"};
  ExecutionError navigation_execution{0.5, deg_to_rad(1.0)};
  ExecutionError robot_execution{0.29, deg_to_rad(0.3)};
  double lumbar_screw_diameter = 6.5;   // mm
  double thoracic_screw_diameter = 4.5; // mm
  double screw_length = 40.0;           // mm
  ImagingPolicy imaging;
  double verification_threshold_mm = 2.0;
  std::size_t verification_probes = 4;

  void validate() const;
};

// One registration trial under fixed factors.
struct Factors {
  double group_multiplier = 1.0;
  double tool_angle_deg = 0.0;
  double tracker_distance_mm = 1500.0;
  double detector_distance_mm = 350.0;
};

struct RegistrationSample {
  double fre_rms = 0.0;
  RigidTransform image_to_drb_estimate;  // image = CT for point-based, AP camera for 2D
  RigidTransform image_to_drb_truth;
  // Requested anatomical targets as the navigation chain places them (DRB
  // frame). For 2D registration a target is located in both exposures and
  // reconstructed through the estimated cameras.
  std::vector<Vec3> targets_drb;
};

// Landmarks on the posterior elements of `vertebra` (CT image space).
std::vector<Fiducial> vertebra_landmarks(const VertebraModel& vertebra);

// Tracker placed `distance` mm from `roi` along the default viewing direction.
OperatingRoom room_with_tracker_distance(const OperatingRoom& room, const Vec3& roi_room, double distance_mm);

RegistrationSample run_point_based_sample(const OperatingRoom& room, const std::vector<Fiducial>& landmarks,
                                          const Factors& factors, const NoiseModel& noise, double scale, Rng& rng,
                                          const std::vector<Vec3>& targets_room = {});
RegistrationSample run_automatic_2d_sample(const OperatingRoom& room, const Vec3& roi_room, const Factors& factors,
                                           const NoiseModel& noise, double scale, Rng& rng,
                                           const std::vector<Vec3>& targets_room = {});

struct PhantomRow {
  RegistrationMethod method = RegistrationMethod::POINT_BASED;
  std::size_t index = 0;
  Factors factors;
  double fre_rms = 0.0;
};

struct MethodSummary {
  StudyStats stats;
  // factor name -> factor value (formatted) -> stats
  std::map<std::string, std::map<std::string, StudyStats>> breakdown;
};

struct PhantomReport {
  StudyConfig config;
  std::vector<PhantomRow> rows;
  std::map<RegistrationMethod, MethodSummary> methods;
};

// Factor levels cycle full-factorially with the sample index.
Factors factors_for(const StudyConfig& cfg, std::size_t index);
PhantomReport run_phantom_study(const StudyConfig& cfg);
// Mean fre_rms of `samples` trials of one method at `scale` (common seeds).
double phantom_mean(const StudyConfig& cfg, RegistrationMethod method, double scale, std::size_t samples,
                    std::uint64_t seed);

struct ScrewRow {
  std::size_t session = 0;
  std::string screw_id;
  std::string level;
  Side side = Side::Left;
  double registration_fre = 0.0;
  double entry_error_mm = 0.0;   // achieved vs planned entry
  double angle_error_rad = 0.0;  // achieved vs planned direction
  BreachReport report;
};

struct CadaverReport {
  StudyConfig config;
  std::vector<ScrewRow> rows;
  std::array<double, 5> grade_percent{};
  std::array<std::size_t, 5> grade_counts{};
  std::uint64_t total_shots = 0;
  double mean_shots_per_screw = 0.0;
  bool ledgers_consistent = true;
  StudyStats registration;
  std::size_t registration_rejections = 0;
  std::vector<std::string> session_reports;  // workflow report JSON per session
};

CadaverReport run_cadaver_style_study(const StudyConfig& cfg);

struct CalibrationResult {
  RegistrationMethod method = RegistrationMethod::POINT_BASED;
  double target_mu = 0.0;
  double scale = 0.0;
  double achieved_mu = 0.0;
  int iterations = 0;
};

// Bracketed root search (secant with bisection fallback) on the method's
// noise scale until the simulated mean over `samples` trials is within
// `rel_tol` of the target. The upper end doubles up to six times while the
// mean stays below the target. NonMonotoneBracket when the bracket never
// straddles the target or the mean turns out non-monotone.
CalibrationResult calibrate_noise(const StudyConfig& cfg, double target_mu, RegistrationMethod method,
                                  std::size_t samples = 500, double rel_tol = 0.02, double lo = 0.0,
                                  double hi = 1.0);

struct BandCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};
std::vector<BandCheck> check_phantom(const PhantomReport& report);
std::vector<BandCheck> check_cadaver(const CadaverReport& report);

// ---- serialization -------------------------------------------------------

// Config JSON mirrors StudyConfig field names; missing fields keep defaults.
StudyConfig parse_study_config(const std::string& text);
std::string serialize_study_config(const StudyConfig& cfg);
StudyConfig load_study_config(const std::string& path);

// {"schema_version", "point_based_scale", "automatic_2d_scale", ...}
std::string serialize_calibration(const std::vector<CalibrationResult>& results, const StudyConfig& cfg);
// Applies the scales in a calibration document to `cfg`.
void apply_calibration(StudyConfig& cfg, const std::string& text);

std::string phantom_report_json(const PhantomReport& report);
std::string phantom_rows_csv(const PhantomReport& report);
std::string cadaver_report_json(const CadaverReport& report);
std::string cadaver_rows_csv(const CadaverReport& report);

}  // namespace igss
