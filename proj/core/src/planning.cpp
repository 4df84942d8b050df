#include "igss/planning.hpp"

#include <algorithm>
#include <cmath>

#include "igss/error.hpp"

namespace igss {

std::string to_string(Side side) { return side == Side::Left ? "left" : "right"; }

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::Left;
  if (s == "right") return Side::Right;
  raise(ErrorKind::ParseError, "unknown side " + s);
}

std::string to_string(Grade g) {
  static constexpr const char* names[] = {"A", "B", "C", "D", "E"};
  return names[static_cast<int>(g)];
}

Grade grade_from_string(const std::string& s) {
  if (s.size() == 1 && s[0] >= 'A' && s[0] <= 'E') return static_cast<Grade>(s[0] - 'A');
  raise(ErrorKind::ParseError, "unknown grade " + s);
}

void validate_plan(const ScrewPlan& plan) {
  if (!(plan.length >= 20.0 && plan.length <= 60.0)) raise(ErrorKind::InvalidArgument, "screw length outside [20, 60] mm");
  if (!(plan.diameter >= 3.5 && plan.diameter <= 8.5)) {
    raise(ErrorKind::InvalidArgument, "screw diameter outside [3.5, 8.5] mm");
  }
  if (!plan.entry.allFinite() || std::abs(plan.direction.norm() - 1.0) > 1e-9) {
    raise(ErrorKind::InvalidArgument, "screw direction must be a unit vector");
  }
}

Grade grade_gertzbein(double depth, bool anterior_perforation) {
  if (depth < 0.0) raise(ErrorKind::InvalidArgument, "breach depth must be >= 0");
  if (anterior_perforation || depth >= 6.0) return Grade::E;
  if (depth >= 4.0) return Grade::D;
  if (depth >= 2.0) return Grade::C;
  if (depth > 0.0) return Grade::B;
  return Grade::A;
}

double ellipse_exterior_distance(double a, double b, double x, double y) {
  // Reduce to the first quadrant with the major semi-axis first.
  double e0 = a, e1 = b, y0 = std::abs(x), y1 = std::abs(y);
  if (e0 < e1) {
    std::swap(e0, e1);
    std::swap(y0, y1);
  }
  const double z0 = y0 / e0, z1 = y1 / e1;
  const double g = z0 * z0 + z1 * z1 - 1.0;
  if (g <= 0.0) return 0.0;

  if (y1 == 0.0) {
    const double numer = e0 * y0, denom = e0 * e0 - e1 * e1;
    if (numer < denom) {
      const double xd = numer / denom;
      const double x0 = e0 * xd, x1 = e1 * std::sqrt(std::max(0.0, 1.0 - xd * xd));
      return std::hypot(x0 - y0, x1);
    }
    return y0 - e0;
  }
  if (y0 == 0.0) return y1 - e1;

  // Closest point (x0, x1) = (r0 y0 / (s + r0), y1 / (s + 1)) where s > 0 is
  // the unique root of F(s) = (r0 z0 / (s + r0))^2 + (z1 / (s + 1))^2 - 1.
  const double r0 = (e0 / e1) * (e0 / e1);
  const double n0 = r0 * z0;
  double lo = z1 - 1.0;
  double hi = std::hypot(n0, z1) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 200; ++i) {
    s = 0.5 * (lo + hi);
    if (s == lo || s == hi) break;
    const double ra = n0 / (s + r0), rb = z1 / (s + 1.0);
    const double f = ra * ra + rb * rb - 1.0;
    if (f > 0.0) lo = s;
    else if (f < 0.0) hi = s;
    else break;
  }
  const double x0 = r0 * y0 / (s + r0);
  const double x1 = y1 / (s + 1.0);
  return std::hypot(x0 - y0, x1 - y1);
}

double elliptic_cylinder_exterior_distance(const EllipticCylinder& cyl, const Vec3& p) {
  const Vec3 q = p - cyl.center;
  return ellipse_exterior_distance(cyl.a, cyl.b, q.dot(cyl.width_dir), q.dot(cyl.height_dir()));
}

Interval pedicle_traversal(const ScrewPlan& plan, const EllipticCylinder& pedicle) {
  const double half = 0.5 * pedicle.length;
  const double w0 = (plan.entry - pedicle.center).dot(pedicle.axis);
  const double k = plan.direction.dot(pedicle.axis);
  Interval iv{0.0, plan.length};
  if (std::abs(k) < 1e-12) {
    if (std::abs(w0) > half) iv = {1.0, 0.0};
    return iv;
  }
  double s0 = (-half - w0) / k, s1 = (half - w0) / k;
  if (s0 > s1) std::swap(s0, s1);
  iv.lo = std::max(0.0, s0);
  iv.hi = std::min(plan.length, s1);
  return iv;
}

namespace {

struct CircleMax {
  double value = 0.0;
  double angle = 0.0;
};

// Maximum exterior distance over the screw-surface circle at axis parameter s.
CircleMax max_on_circle(const EllipticCylinder& cyl, const Vec3& center, const Vec3& u, const Vec3& v,
                        double radius) {
  auto f = [&](double phi) {
    return elliptic_cylinder_exterior_distance(cyl, center + radius * (std::cos(phi) * u + std::sin(phi) * v));
  };
  constexpr int kScan = 720;
  const double step = 2.0 * kPi / kScan;
  std::vector<double> vals(kScan);
  for (int i = 0; i < kScan; ++i) vals[i] = f(i * step);

  CircleMax best;
  for (int i = 0; i < kScan; ++i) {
    const double prev = vals[(i + kScan - 1) % kScan], next = vals[(i + 1) % kScan];
    if (vals[i] < prev || vals[i] < next || vals[i] <= 0.0) {
      if (vals[i] > best.value) best = {vals[i], i * step};
      continue;
    }
    // Golden-section refinement of a local maximum bracketed by its neighbours.
    double lo = (i - 1) * step, hi = (i + 1) * step;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = f(c), fd = f(d);
    while (hi - lo > 1e-10) {
      if (fc > fd) {
        hi = d; d = c; fd = fc;
        c = hi - gr * (hi - lo); fc = f(c);
      } else {
        lo = c; c = d; fc = fd;
        d = lo + gr * (hi - lo); fd = f(d);
      }
    }
    const double phi = 0.5 * (lo + hi);
    const double val = std::max({f(phi), vals[i]});
    if (val > best.value) best = {val, val == vals[i] ? i * step : phi};
  }
  best.angle = std::fmod(best.angle + 2.0 * kPi, 2.0 * kPi);
  return best;
}

}  // namespace

BreachReport validate_trajectory(const ScrewPlan& plan, const VertebraModel& vertebra) {
  if (plan.level != vertebra.level) {
    raise(ErrorKind::SideMismatch, "plan for " + plan.level + " checked against " + vertebra.level);
  }
  validate_plan(plan);
  const EllipticCylinder& ped = vertebra.pedicle(plan.side);

  Interval iv = pedicle_traversal(plan, ped);
  if (iv.empty()) iv = {0.0, plan.length};  // misses the corridor: judge the whole screw

  // Reference frame about the screw axis.
  Vec3 u = ped.width_dir - ped.width_dir.dot(plan.direction) * plan.direction;
  u = u.norm() > 1e-9 ? u.normalized() : any_orthogonal(plan.direction);
  const Vec3 v = plan.direction.cross(u);
  const double radius = 0.5 * plan.diameter;

  // Exterior distance to a convex set is convex, so over the swept cylinder
  // segment its maximum sits on one of the two end circles.
  BreachReport report;
  for (double s : {iv.lo, iv.hi}) {
    const CircleMax m = max_on_circle(ped, plan.entry + s * plan.direction, u, v, radius);
    if (m.value > report.max_breach_depth) {
      report.max_breach_depth = m.value;
      report.breach_param = s;
      report.breach_angle = m.angle;
    }
  }
  report.anterior_perforation =
      (plan.tip() - vertebra.anterior_cortex.point).dot(vertebra.anterior_cortex.normal) > 0.0;
  report.grade = grade_gertzbein(report.max_breach_depth, report.anterior_perforation);
  return report;
}

ScrewPlan simulate_execution(const ScrewPlan& plan, const ExecutionError& error, Rng& rng) {
  if (error.translation_sigma < 0.0 || error.rotation_sigma < 0.0) {
    raise(ErrorKind::InvalidArgument, "execution sigmas must be >= 0");
  }
  ScrewPlan out = plan;
  const Vec3 dt = rng.normal_vec3(error.translation_sigma);
  const Vec3 omega = rng.normal_vec3(error.rotation_sigma);
  out.entry = plan.entry + dt;
  if (error.rotation_sigma > 0.0) {
    out.direction = RigidTransform::from_rotation_vector(omega).apply_direction(plan.direction).normalized();
  }
  return out;
}

ScrewPlan simulate_execution(const ScrewPlan& plan, const ExecutionError& error, std::uint64_t seed) {
  Rng rng(seed);
  return simulate_execution(plan, error, rng);
}

const std::vector<std::string>& known_levels() {
  static const std::vector<std::string> levels = {"S1",  "L5",  "L4", "L3", "L2", "L1", "T12", "T11", "T10",
                                                  "T9",  "T8",  "T7", "T6", "T5", "T4", "T3",  "T2",  "T1"};
  return levels;
}

std::map<std::string, LevelGeometry> default_level_table() {
  std::map<std::string, LevelGeometry> t;
  const LevelGeometry lumbar{5.0, 7.0, 18.0, deg_to_rad(15.0), 22.0, 27.0, 35.0};
  const LevelGeometry thoracic{3.5, 5.5, 15.0, deg_to_rad(10.0), 15.0, 21.0, 25.0};
  const LevelGeometry sacral{6.0, 8.0, 20.0, deg_to_rad(25.0), 24.0, 25.0, 35.0};
  for (const auto& l : known_levels()) {
    if (l[0] == 'L') t[l] = lumbar;
    else if (l[0] == 'T') t[l] = thoracic;
    else t[l] = sacral;
  }
  return t;
}

namespace {

VertebraModel make_vertebra(const std::string& level, const LevelGeometry& g, double z) {
  VertebraModel v;
  v.level = level;
  const double gap = 2.0;
  const double body_y = 0.5 * g.pedicle_length + gap + g.body_radius;
  const double aim_y = body_y + 0.3 * g.body_radius;  // axes meet at this midline point
  const double x_p = std::tan(g.medial_angle) * aim_y;
  const double s = std::sin(g.medial_angle), c = std::cos(g.medial_angle);

  v.left_pedicle = {Vec3(x_p, 0.0, z), Vec3(-s, c, 0.0), Vec3(c, s, 0.0), g.pedicle_a, g.pedicle_b, g.pedicle_length};
  v.right_pedicle = {Vec3(-x_p, 0.0, z), Vec3(s, c, 0.0), Vec3(-c, s, 0.0), g.pedicle_a, g.pedicle_b,
                     g.pedicle_length};
  v.body = {Vec3(0.0, body_y, z), Vec3::UnitZ(), g.body_radius, g.body_height};
  v.anterior_cortex = {Vec3(0.0, body_y + g.body_radius, z), Vec3::UnitY()};
  return v;
}

Vec3 reflect_x(const Vec3& p) { return Vec3(-p.x(), p.y(), p.z()); }

EllipticCylinder mirror(const EllipticCylinder& c) {
  EllipticCylinder m = c;
  m.center = reflect_x(c.center);
  m.axis = reflect_x(c.axis);
  m.width_dir = reflect_x(c.width_dir);
  return m;
}

}  // namespace

std::vector<VertebraModel> build_spine(const std::vector<std::string>& levels,
                                       const std::map<std::string, LevelGeometry>& table) {
  // z of each level: S1 at 0, stacked cranially by the caudal neighbour's spacing.
  std::map<std::string, double> z_of;
  double z = 0.0;
  for (const auto& l : known_levels()) {
    const auto it = table.find(l);
    if (it == table.end()) continue;
    z_of[l] = z;
    z += it->second.level_spacing;
  }
  std::vector<VertebraModel> out;
  for (const auto& l : levels) {
    const auto it = table.find(l);
    if (it == table.end() || !z_of.count(l)) raise(ErrorKind::UnknownLevel, "unknown vertebral level " + l);
    out.push_back(make_vertebra(l, it->second, z_of.at(l)));
  }
  return out;
}

std::vector<VertebraModel> build_default_spine(const std::vector<std::string>& levels) {
  return build_spine(levels, default_level_table());
}

ScrewPlan axial_plan(const VertebraModel& vertebra, Side side, double length, double diameter) {
  const auto& p = vertebra.pedicle(side);
  ScrewPlan plan;
  plan.level = vertebra.level;
  plan.side = side;
  plan.entry = p.entry_point();
  plan.direction = p.axis.normalized();
  plan.length = length;
  plan.diameter = diameter;
  return plan;
}

VertebraModel mirror(const VertebraModel& v) {
  VertebraModel m = v;
  m.left_pedicle = mirror(v.right_pedicle);
  m.right_pedicle = mirror(v.left_pedicle);
  m.body.center = reflect_x(v.body.center);
  m.body.axis = reflect_x(v.body.axis);
  m.anterior_cortex.point = reflect_x(v.anterior_cortex.point);
  m.anterior_cortex.normal = reflect_x(v.anterior_cortex.normal);
  return m;
}

ScrewPlan mirror(const ScrewPlan& p) {
  ScrewPlan m = p;
  m.side = p.side == Side::Left ? Side::Right : Side::Left;
  m.entry = reflect_x(p.entry);
  m.direction = reflect_x(p.direction);
  return m;
}

}  // namespace igss
