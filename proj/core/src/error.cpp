#include "igss/error.hpp"

namespace igss {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NoPath: return "NoPath";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::LabelMismatch: return "LabelMismatch";
    case ErrorKind::InvalidN: return "InvalidN";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::BehindSource: return "BehindSource";
    case ErrorKind::AmbiguousMatch: return "AmbiguousMatch";
    case ErrorKind::TooFewDetections: return "TooFewDetections";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::DegenerateBeads: return "DegenerateBeads";
    case ErrorKind::ViewsTooClose: return "ViewsTooClose";
    case ErrorKind::InsufficientMarkers: return "InsufficientMarkers";
    case ErrorKind::ResidualTooHigh: return "ResidualTooHigh";
    case ErrorKind::IllConditioned: return "IllConditioned";
    case ErrorKind::TimestampMismatch: return "TimestampMismatch";
    case ErrorKind::SideMismatch: return "SideMismatch";
    case ErrorKind::UnknownLevel: return "UnknownLevel";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::LimitViolation: return "LimitViolation";
    case ErrorKind::CollisionOnPath: return "CollisionOnPath";
    case ErrorKind::VelocityInfeasible: return "VelocityInfeasible";
    case ErrorKind::RegistrationMissing: return "RegistrationMissing";
    case ErrorKind::IllegalTransition: return "IllegalTransition";
    case ErrorKind::NoRegistration: return "NoRegistration";
    case ErrorKind::TooFewProbes: return "TooFewProbes";
    case ErrorKind::IllegalState: return "IllegalState";
    case ErrorKind::NonMonotoneBracket: return "NonMonotoneBracket";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace igss
