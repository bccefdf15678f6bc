#pragma once

#include <stdexcept>
#include <string>

namespace stiefel {

enum class ErrorCode {
  Diverged,
  NonFinite,
  RankDeficient,
  NotTangent,
  NotFeasible,
  DimensionMismatch,
  InvalidArgument,
  SingularM,
  DegenerateFit,
  Config,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Diverged: return "DIVERGED";
    case ErrorCode::NonFinite: return "NONFINITE";
    case ErrorCode::RankDeficient: return "RANK_DEFICIENT";
    case ErrorCode::NotTangent: return "NOT_TANGENT";
    case ErrorCode::NotFeasible: return "NOT_FEASIBLE";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::SingularM: return "SINGULAR_M";
    case ErrorCode::DegenerateFit: return "DEGENERATE_FIT";
    case ErrorCode::Config: return "CONFIG";
    case ErrorCode::Io: return "IO";
  }
  return "UNKNOWN";
}

}  // namespace stiefel
