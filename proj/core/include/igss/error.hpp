#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace igss {

// Every failure the library reports maps to exactly one kind.
enum class ErrorKind {
  NoPath,
  DegenerateConfiguration,
  LabelMismatch,
  InvalidN,
  InsufficientData,
  InvalidArgument,
  BehindSource,
  AmbiguousMatch,
  TooFewDetections,
  NonConvergence,
  DegenerateBeads,
  ViewsTooClose,
  InsufficientMarkers,
  ResidualTooHigh,
  IllConditioned,
  TimestampMismatch,
  SideMismatch,
  UnknownLevel,
  Unreachable,
  LimitViolation,
  CollisionOnPath,
  VelocityInfeasible,
  RegistrationMissing,
  IllegalTransition,
  NoRegistration,
  TooFewProbes,
  IllegalState,
  NonMonotoneBracket,
  NotFound,
  ParseError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace igss
