#pragma once

#include <stdexcept>
#include <string>

namespace seqpi {

enum class ErrorKind {
  usage,            // bad arguments or configuration
  data,             // malformed or invariant-violating data
  convergence,      // model fit failed to converge
  separation,       // perfect separation / degenerate labels in a fit
  irreversibility,  // cesarean followed by vaginal decision
  not_at_risk,      // operation requires z = 1
  conflict,         // session state does not admit the request
  not_found,        // unknown session or resource
  positivity,       // empty regime-consistent stratum
  mode,             // operation not available in this SCM mode
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define SEQPI_DEFINE_ERROR(Name, Kind)                                      \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& message) : Error(ErrorKind::Kind, message) {} \
  };

SEQPI_DEFINE_ERROR(UsageError, usage)
SEQPI_DEFINE_ERROR(DataError, data)
SEQPI_DEFINE_ERROR(ConvergenceError, convergence)
SEQPI_DEFINE_ERROR(SeparationError, separation)
SEQPI_DEFINE_ERROR(IrreversibilityError, irreversibility)
SEQPI_DEFINE_ERROR(NotAtRiskError, not_at_risk)
SEQPI_DEFINE_ERROR(ConflictError, conflict)
SEQPI_DEFINE_ERROR(NotFoundError, not_found)
SEQPI_DEFINE_ERROR(PositivityError, positivity)
SEQPI_DEFINE_ERROR(ModeError, mode)

#undef SEQPI_DEFINE_ERROR

inline const char* error_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::data: return "data";
    case ErrorKind::convergence: return "convergence";
    case ErrorKind::separation: return "separation";
    case ErrorKind::irreversibility: return "irreversibility";
    case ErrorKind::not_at_risk: return "not_at_risk";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::positivity: return "positivity";
    case ErrorKind::mode: return "mode";
  }
  return "error";
}

}  // namespace seqpi
