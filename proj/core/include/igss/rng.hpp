// Seeded pseudo-random source used by every stochastic experiment.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. Uniform and Gaussian variates are derived here rather than via
// <random> distributions so that a seed reproduces bit-identical draws on any
// standard library.
#pragma once

#include <cstdint>
#include <random>

#include "igss/geometry.hpp"

namespace igss {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent generator for sub-stream `stream` of `seed`; used to fan out
  // samples so results do not depend on execution order.
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                     // [0, 1)
  double uniform(double lo, double hi);
  double normal();                      // N(0, 1)
  double normal(double mean, double sigma) { return mean + sigma * normal(); }
  std::size_t index(std::size_t n);     // [0, n)

  Vec3 normal_vec3(double sigma_per_axis);
  Vec3 unit_vector();
  Mat3 rotation();                      // Haar-uniform on SO(3)
  // Uniform rotation plus translation uniform in [-max_translation, max_translation]^3.
  RigidTransform rigid_transform(double max_translation);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer, exposed for seed derivation.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace igss
