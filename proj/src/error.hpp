#pragma once

#include <stdexcept>
#include <string>

namespace elgm {

// Error classes mirrored one-to-one by the C API status codes.
enum class ErrorCode {
  InvalidArgument,
  InvalidOrder,
  Capacity,
  NotPositiveDefinite,
  InvalidStart,
  NoConvergence,
  DegeneratePosterior,
  Domain,
  Parse,
  Io,
  Internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::InvalidOrder: return "invalid-order";
    case ErrorCode::Capacity: return "capacity";
    case ErrorCode::NotPositiveDefinite: return "not-positive-definite";
    case ErrorCode::InvalidStart: return "invalid-start";
    case ErrorCode::NoConvergence: return "no-convergence";
    case ErrorCode::DegeneratePosterior: return "degenerate-posterior";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::Parse: return "parse";
    case ErrorCode::Io: return "io";
    case ErrorCode::Internal: return "internal";
  }
  return "internal";
}

}  // namespace elgm
