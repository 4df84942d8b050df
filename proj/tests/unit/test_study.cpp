#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "igss/study.hpp"

using namespace igss;
using igss::test::check_raises;

namespace {

StudyConfig small_config() {
  StudyConfig cfg;
  cfg.samples = 27;
  cfg.screws = 14;
  cfg.seed = test::kSeed;
  return cfg;
}

NoiseModel silent() {
  NoiseModel n;
  n.tracker_sigma_mm = 0.0;
  n.landmark_sigma_mm = 0.0;
  n.pixel_sigma = 0.0;
  return n;
}

}  // namespace

TEST_CASE("noiseless phantom registrations are exact") {
  StudyConfig cfg = small_config();
  cfg.noise = silent();
  const PhantomReport r = run_phantom_study(cfg);
  REQUIRE(r.rows.size() == 2 * cfg.samples);
  for (const auto& row : r.rows) CHECK(row.fre_rms < 1e-6);
}

TEST_CASE("phantom reports are reproducible and self-consistent") {
  const StudyConfig cfg = small_config();
  const PhantomReport a = run_phantom_study(cfg);
  const PhantomReport b = run_phantom_study(cfg);
  CHECK(phantom_report_json(a) == phantom_report_json(b));
  CHECK(phantom_rows_csv(a) == phantom_rows_csv(b));

  const std::string csv = phantom_rows_csv(a);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == a.rows.size() + 1);

  for (const auto& [method, summary] : a.methods) {
    std::vector<double> v;
    for (const auto& row : a.rows) {
      if (row.method == method) v.push_back(row.fre_rms);
    }
    REQUIRE(v.size() == cfg.samples);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    CHECK(std::abs(summary.stats.mean - mean) < 1e-12);
    CHECK(std::abs(summary.stats.sd - sd) < 1e-12);
    CHECK(std::abs(summary.stats.mean_plus_2sd - (mean + 2.0 * sd)) < 1e-12);
    CHECK(summary.breakdown.count("tool_angle_deg") == 1);
  }

  StudyConfig other = cfg;
  other.seed += 1;
  CHECK(phantom_report_json(run_phantom_study(other)) != phantom_report_json(a));
}

TEST_CASE("factor levels cycle full-factorially") {
  const StudyConfig cfg = small_config();
  std::map<std::tuple<double, double, double, double>, int> seen;
  for (std::size_t i = 0; i < 81; ++i) {
    const Factors f = factors_for(cfg, i);
    ++seen[{f.group_multiplier, f.tool_angle_deg, f.tracker_distance_mm, f.detector_distance_mm}];
  }
  CHECK(seen.size() == 81);
}

TEST_CASE("mean error grows with the noise scale") {
  const StudyConfig cfg = small_config();
  for (RegistrationMethod m : {RegistrationMethod::POINT_BASED, RegistrationMethod::AUTOMATIC_2D}) {
    double prev = -1.0;
    for (double s : {0.25, 0.5, 1.0, 2.0}) {
      const double mu = phantom_mean(cfg, m, s, 30, 77);
      CHECK(mu > prev);
      prev = mu;
    }
  }
}

TEST_CASE("noise calibration hits its target") {
  const StudyConfig cfg = small_config();
  const CalibrationResult zero = calibrate_noise(cfg, 0.0, RegistrationMethod::POINT_BASED);
  CHECK(zero.scale == 0.0);
  const CalibrationResult c = calibrate_noise(cfg, 0.9, RegistrationMethod::POINT_BASED, 40, 0.02);
  CHECK(std::abs(c.achieved_mu - 0.9) <= 0.02 * 0.9);
  CHECK(c.scale > 0.0);
  const CalibrationResult higher = calibrate_noise(cfg, 1.2, RegistrationMethod::POINT_BASED, 40, 0.02);
  CHECK(higher.scale > c.scale);
  check_raises(ErrorKind::NonMonotoneBracket,
               [&] { (void)calibrate_noise(cfg, 1e-4, RegistrationMethod::POINT_BASED, 20); });
  check_raises(ErrorKind::InvalidArgument, [&] { (void)calibrate_noise(cfg, -1.0, RegistrationMethod::POINT_BASED); });

  StudyConfig applied = cfg;
  apply_calibration(applied, serialize_calibration({c, higher}, cfg));
  CHECK(applied.noise.scale.at(RegistrationMethod::POINT_BASED) == doctest::Approx(higher.scale));
}

TEST_CASE("perfect execution grades every screw A with three shots each") {
  for (Mode mode : {Mode::ROBOT_ASSISTED, Mode::NAVIGATION_ONLY}) {
    StudyConfig cfg = small_config();
    cfg.mode = mode;
    cfg.noise = silent();
    cfg.navigation_execution = {0.0, 0.0};
    cfg.robot_execution = {0.0, 0.0};
    const CadaverReport r = run_cadaver_style_study(cfg);
    CHECK(r.rows.size() == cfg.screws);
    CHECK(r.grade_percent[0] == 100.0);
    CHECK(r.mean_shots_per_screw == 3.0);
    CHECK(r.total_shots == 3 * cfg.screws);
    CHECK(r.ledgers_consistent);
    CHECK(r.registration_rejections == 0);
  }
}

TEST_CASE("cadaver study is reproducible") {
  StudyConfig cfg = small_config();
  cfg.cadaver_method = RegistrationMethod::POINT_BASED;
  const CadaverReport a = run_cadaver_style_study(cfg);
  const CadaverReport b = run_cadaver_style_study(cfg);
  CHECK(cadaver_report_json(a) == cadaver_report_json(b));
  CHECK(cadaver_rows_csv(a) == cadaver_rows_csv(b));
  double sum = 0.0;
  for (double p : a.grade_percent) sum += p;
  CHECK(sum == doctest::Approx(100.0));
}

TEST_CASE("study configuration round trips and is validated") {
  StudyConfig cfg = small_config();
  cfg.mode = Mode::NAVIGATION_ONLY;
  cfg.levels = {"L4", "L5"};
  const StudyConfig back = parse_study_config(serialize_study_config(cfg));
  CHECK(serialize_study_config(back) == serialize_study_config(cfg));
  CHECK(back.mode == Mode::NAVIGATION_ONLY);
  StudyConfig bad = cfg;
  bad.samples = 0;
  check_raises(ErrorKind::InvalidArgument, [&] { bad.validate(); });
  bad = cfg;
  bad.levels = {"X9"};
  check_raises(ErrorKind::UnknownLevel, [&] { bad.validate(); });
}
