#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "igss/planning.hpp"
#include "oracles.hpp"

using namespace igss;
using igss::test::check_raises;

TEST_CASE("ellipse distance matches boundary sampling") {
  Rng rng(test::kSeed);
  for (int i = 0; i < 300; ++i) {
    const double a = rng.uniform(2.0, 8.0), b = rng.uniform(2.0, 8.0);
    const double x = rng.uniform(-15.0, 15.0), y = rng.uniform(-15.0, 15.0);
    CHECK(std::abs(ellipse_exterior_distance(a, b, x, y) - oracle::ellipse_distance(a, b, x, y)) < 1e-4);
  }
  CHECK(ellipse_exterior_distance(5.0, 7.0, 0.0, 0.0) == 0.0);
  CHECK(ellipse_exterior_distance(5.0, 7.0, 8.0, 0.0) == doctest::Approx(3.0));
  CHECK(ellipse_exterior_distance(5.0, 7.0, 0.0, -9.5) == doctest::Approx(2.5));
}

TEST_CASE("axial screws are contained at every default level") {
  const auto spine = build_default_spine(known_levels());
  for (const auto& v : spine) {
    for (Side side : {Side::Left, Side::Right}) {
      const double d = v.level[0] == 'T' ? 4.5 : 6.5;
      const BreachReport r = validate_trajectory(axial_plan(v, side, 40.0, d), v);
      CHECK_MESSAGE(r.grade == Grade::A, v.level);
      CHECK(r.max_breach_depth == 0.0);
      CHECK_FALSE(r.anterior_perforation);
    }
  }
}

TEST_CASE("breach depth agrees with the sampling oracle") {
  const auto spine = build_default_spine({"T11", "T12", "L1", "L3", "L5", "S1"});
  Rng rng(test::kSeed + 1);
  double worst = 0.0;
  for (int i = 0; i < 150; ++i) {
    const VertebraModel& v = spine[rng.index(spine.size())];
    const ScrewPlan p = oracle::perturbed_plan(v, rng);
    const double analytic = validate_trajectory(p, v).max_breach_depth;
    const double oracle = oracle::breach_depth(p, v);
    worst = std::max(worst, std::abs(analytic - oracle));
    CHECK(std::abs(analytic - oracle) < 0.01);
  }
  MESSAGE("worst oracle gap " << worst << " mm");
}

TEST_CASE("Gertzbein-Robbins bins") {
  CHECK(grade_gertzbein(0.0, false) == Grade::A);
  CHECK(grade_gertzbein(1e-9, false) == Grade::B);
  CHECK(grade_gertzbein(1.99, false) == Grade::B);
  CHECK(grade_gertzbein(2.0, false) == Grade::C);
  CHECK(grade_gertzbein(3.999, false) == Grade::C);
  CHECK(grade_gertzbein(4.0, false) == Grade::D);
  CHECK(grade_gertzbein(6.0, false) == Grade::E);
  CHECK(grade_gertzbein(0.0, true) == Grade::E);
}

TEST_CASE("lateral entry offsets worsen the breach monotonically") {
  const auto spine = build_default_spine({"L3"});
  const VertebraModel& v = spine.front();
  const ScrewPlan base = axial_plan(v, Side::Left, 40.0, 6.5);
  double prev = -1.0;
  for (double dx = 0.0; dx <= 6.0; dx += 0.25) {
    ScrewPlan p = base;
    p.entry += dx * v.left_pedicle.width_dir;
    const double depth = validate_trajectory(p, v).max_breach_depth;
    CHECK(depth >= prev);
    prev = depth;
  }
  CHECK(prev > 2.0);
}

TEST_CASE("sagittal mirror preserves the report") {
  const auto spine = build_default_spine({"L2"});
  Rng rng(test::kSeed + 2);
  for (int i = 0; i < 50; ++i) {
    const ScrewPlan p = oracle::perturbed_plan(spine.front(), rng);
    const BreachReport a = validate_trajectory(p, spine.front());
    const BreachReport b = validate_trajectory(mirror(p), mirror(spine.front()));
    CHECK(a.max_breach_depth == doctest::Approx(b.max_breach_depth).epsilon(1e-9));
    CHECK(a.grade == b.grade);
  }
}

TEST_CASE("plans are checked against the right level and ranges") {
  const auto spine = build_default_spine({"L3", "L4"});
  const ScrewPlan p = axial_plan(spine[0], Side::Left, 40.0, 6.5);
  check_raises(ErrorKind::SideMismatch, [&] { (void)validate_trajectory(p, spine[1]); });
  ScrewPlan bad = p;
  bad.length = 70.0;
  check_raises(ErrorKind::InvalidArgument, [&] { validate_plan(bad); });
  bad = p;
  bad.direction *= 2.0;
  check_raises(ErrorKind::InvalidArgument, [&] { validate_plan(bad); });
  check_raises(ErrorKind::UnknownLevel, [] { (void)build_default_spine({"C7"}); });
}

TEST_CASE("anterior perforation is flagged for long screws") {
  const auto spine = build_default_spine({"L4"});
  ScrewPlan p = axial_plan(spine.front(), Side::Right, 60.0, 6.5);
  const BreachReport r = validate_trajectory(p, spine.front());
  CHECK(r.anterior_perforation == ((p.tip() - spine.front().anterior_cortex.point).dot(spine.front().anterior_cortex.normal) > 0.0));
  if (r.anterior_perforation) CHECK(r.grade == Grade::E);
}

TEST_CASE("execution error is seeded and zero-noise exact") {
  const auto spine = build_default_spine({"L1"});
  const ScrewPlan p = axial_plan(spine.front(), Side::Left, 40.0, 6.5);
  const ScrewPlan same = simulate_execution(p, {0.0, 0.0}, 5);
  CHECK((same.entry - p.entry).norm() == 0.0);
  CHECK((same.direction - p.direction).norm() == 0.0);
  const ScrewPlan a = simulate_execution(p, {0.5, 0.01}, 5), b = simulate_execution(p, {0.5, 0.01}, 5);
  CHECK((a.entry - b.entry).norm() == 0.0);
  CHECK(a.direction.norm() == doctest::Approx(1.0));
}

TEST_CASE("plan and report documents round trip") {
  const auto spine = build_default_spine({"T12"});
  Rng rng(test::kSeed + 3);
  const ScrewPlan p = oracle::perturbed_plan(spine.front(), rng);
  const ScrewPlan back = parse_plan(serialize_plan(p));
  CHECK(back.level == p.level);
  CHECK(back.side == p.side);
  CHECK((back.entry - p.entry).norm() < 1e-12);
  const BreachReport r = validate_trajectory(p, spine.front());
  const BreachReport rb = parse_breach_report(serialize_breach_report(p, r));
  CHECK(rb.max_breach_depth == doctest::Approx(r.max_breach_depth));
  CHECK(rb.grade == r.grade);
  check_raises(ErrorKind::ParseError, [] { (void)parse_plan(R"({"schema_version": 2})"); });
}
