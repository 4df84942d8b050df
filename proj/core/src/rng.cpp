#include "igss/rng.hpp"

#include <cmath>

namespace igss {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng Rng::for_stream(std::uint64_t seed, std::uint64_t stream) {
  return Rng(mix_seed(mix_seed(seed) ^ mix_seed(stream + 0x632BE59BD9B4E019ULL)));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method.
  double u = 0.0, v = 0.0, s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double scale = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * scale;
  has_spare_ = true;
  return u * scale;
}

std::size_t Rng::index(std::size_t n) {
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

Vec3 Rng::normal_vec3(double sigma_per_axis) {
  const double x = normal(), y = normal(), z = normal();
  return Vec3(x, y, z) * sigma_per_axis;
}

Vec3 Rng::unit_vector() {
  Vec3 v;
  do {
    v = normal_vec3(1.0);
  } while (v.norm() < 1e-12);
  return v.normalized();
}

Mat3 Rng::rotation() {
  Eigen::Quaterniond q;
  do {
    const double w = normal(), x = normal(), y = normal(), z = normal();
    q = Eigen::Quaterniond(w, x, y, z);
  } while (q.norm() < 1e-12);
  return q.normalized().toRotationMatrix();
}

RigidTransform Rng::rigid_transform(double max_translation) {
  const Mat3 r = rotation();
  const double x = uniform(-max_translation, max_translation);
  const double y = uniform(-max_translation, max_translation);
  const double z = uniform(-max_translation, max_translation);
  return {r, Vec3(x, y, z)};
}

}  // namespace igss
