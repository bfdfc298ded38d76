#pragma once

#include <stdexcept>
#include <string>

namespace bihlab {

enum class ErrorCode {
  NotSkew,
  Disconnected,
  Empty,
  IncompatibleWidths,
  WeightNotSPD,
  RankDeficient,
  NoSpectralGap,
  SolverDiverged,
  NotInRange,
  ShapeMismatch,
  IoError,
  HeaderMismatch,
  ConfigError
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NotSkew: return "NotSkew";
    case ErrorCode::Disconnected: return "Disconnected";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::IncompatibleWidths: return "IncompatibleWidths";
    case ErrorCode::WeightNotSPD: return "WeightNotSPD";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NoSpectralGap: return "NoSpectralGap";
    case ErrorCode::SolverDiverged: return "SolverDiverged";
    case ErrorCode::NotInRange: return "NotInRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::HeaderMismatch: return "HeaderMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Single exception type of the library; the code identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bihlab
