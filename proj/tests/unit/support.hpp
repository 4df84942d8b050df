// Shared fixtures for the unit tests.
#pragma once

#include <doctest.h>

#include <functional>
#include <string>

#include "igss/error.hpp"
#include "igss/geometry.hpp"
#include "igss/rng.hpp"

namespace igss::test {

inline constexpr std::uint64_t kSeed = 20240501;

// Runs `f` and checks that it throws igss::Error of `kind`.
inline void check_raises(ErrorKind kind, const std::function<void()>& f) {
  try {
    f();
    FAIL("expected ", std::string(to_string(kind)));
  } catch (const Error& e) {
    CHECK_MESSAGE(e.kind() == kind, "got ", std::string(to_string(e.kind())), ": ", e.what());
  }
}

inline bool near(const RigidTransform& a, const RigidTransform& b, double tol) {
  const auto d = pose_delta(a, b);
  return d.translation_mm <= tol && d.rotation_rad <= tol;
}

}  // namespace igss::test
