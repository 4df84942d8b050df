// Experiment runner: phantom accuracy, cadaver-style placement and noise
// calibration studies. Reports go to --out as JSON and/or CSV.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "igss/decimal.hpp"
#include "igss/error.hpp"
#include "igss/study.hpp"

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int report_checks(const std::vector<igss::BandCheck>& checks) {
  int failed = 0;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << '\n';
    if (!c.pass) ++failed;
  }
  return failed;
}

void print_stats(const std::string& name, const igss::StudyStats& s) {
  std::cout << name << ": n=" << s.n << " mean=" << igss::format_fixed6(s.mean) << " sd=" << igss::format_fixed6(s.sd)
            << " mean+1sd=" << igss::format_fixed6(s.mean_plus_1sd)
            << " mean+1.96sd=" << igss::format_fixed6(s.mean_plus_196sd)
            << " mean+2sd=" << igss::format_fixed6(s.mean_plus_2sd) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-guided spine surgery study harness"};
  app.require_subcommand(1);

  std::string config_path, calibration_path, out_dir = ".", format = "both";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> samples;
  bool check = false;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "study config JSON")->check(CLI::ExistingFile);
    sub->add_option("--calibration", calibration_path, "calibration document applied over the config")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", format, "json, csv or both")->check(CLI::IsMember({"json", "csv", "both"}));
    sub->add_flag("--check", check, "exit nonzero when an acceptance band is violated");
  };

  auto* phantom = app.add_subcommand("phantom", "registration accuracy study");
  common(phantom);
  phantom->add_option("--samples", samples, "samples per method");

  auto* cadaver = app.add_subcommand("cadaver", "simulated screw placement study");
  common(cadaver);
  std::string mode, method;
  std::optional<std::size_t> screws;
  cadaver->add_option("--mode", mode, "ROBOT_ASSISTED or NAVIGATION_ONLY");
  cadaver->add_option("--method", method, "point_based or automatic_2d");
  cadaver->add_option("--screws", screws, "number of screws");

  auto* calibrate = app.add_subcommand("calibrate", "fit per-method noise scales to target means");
  common(calibrate);
  double target_pb = 0.99, target_2d = 1.04;
  std::size_t cal_samples = 500;
  calibrate->add_option("--point-based", target_pb, "target mean FRE RMS, mm");
  calibrate->add_option("--automatic-2d", target_2d, "target mean FRE RMS, mm");
  calibrate->add_option("--samples", cal_samples, "samples per evaluation");

  CLI11_PARSE(app, argc, argv);

  try {
    igss::StudyConfig cfg = config_path.empty() ? igss::StudyConfig{} : igss::load_study_config(config_path);
    if (!calibration_path.empty()) igss::apply_calibration(cfg, read_file(calibration_path));
    if (seed) cfg.seed = *seed;
    fs::create_directories(out_dir);
    const bool json = format != "csv", csv = format != "json";

    if (*phantom) {
      if (samples) cfg.samples = *samples;
      cfg.validate();
      const auto report = igss::run_phantom_study(cfg);
      if (json) write_file(fs::path(out_dir) / "phantom_report.json", igss::phantom_report_json(report));
      if (csv) write_file(fs::path(out_dir) / "phantom_rows.csv", igss::phantom_rows_csv(report));
      for (const auto& [m, s] : report.methods) print_stats(igss::to_string(m), s.stats);
      if (check) return report_checks(igss::check_phantom(report)) == 0 ? 0 : 1;
      return 0;
    }
    if (*cadaver) {
      if (!mode.empty()) cfg.mode = igss::mode_from_string(mode);
      if (!method.empty()) cfg.cadaver_method = igss::registration_method_from_string(method);
      if (screws) cfg.screws = *screws;
      cfg.validate();
      const auto report = igss::run_cadaver_style_study(cfg);
      if (json) write_file(fs::path(out_dir) / "cadaver_report.json", igss::cadaver_report_json(report));
      if (csv) write_file(fs::path(out_dir) / "cadaver_rows.csv", igss::cadaver_rows_csv(report));
      std::cout << igss::to_string(cfg.mode) << ' ' << igss::to_string(cfg.cadaver_method) << ", " << report.rows.size()
                << " screws\n";
      for (std::size_t g = 0; g < 5; ++g) {
        std::cout << "  " << igss::to_string(static_cast<igss::Grade>(g)) << ": "
                  << igss::format_fixed6(report.grade_percent[g]) << "%\n";
      }
      std::cout << "  shots per screw: " << igss::format_fixed6(report.mean_shots_per_screw)
                << ", registration rejections: " << report.registration_rejections << '\n';
      if (check) return report_checks(igss::check_cadaver(report)) == 0 ? 0 : 1;
      return 0;
    }
    if (*calibrate) {
      std::vector<igss::CalibrationResult> results;
      results.push_back(igss::calibrate_noise(cfg, target_pb, igss::RegistrationMethod::POINT_BASED, cal_samples));
      results.push_back(igss::calibrate_noise(cfg, target_2d, igss::RegistrationMethod::AUTOMATIC_2D, cal_samples));
      write_file(fs::path(out_dir) / "calibration.json", igss::serialize_calibration(results, cfg));
      int failed = 0;
      for (const auto& r : results) {
        const bool ok = std::abs(r.achieved_mu - r.target_mu) <= 0.02 * r.target_mu;
        if (!ok) ++failed;
        std::cout << igss::to_string(r.method) << ": scale " << igss::format_fixed6(r.scale) << ", mean "
                  << igss::format_fixed6(r.achieved_mu) << " (target " << igss::format_fixed6(r.target_mu) << ", "
                  << r.iterations << " iterations)\n";
      }
      return check && failed ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
