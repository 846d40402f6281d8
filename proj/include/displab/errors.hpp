#pragma once

#include <stdexcept>
#include <string>

namespace displab {

/// Category of a toolkit failure.  Every throwing code path picks the
/// category that names what went wrong, so callers (CLI, tests) can react
/// without string matching.
enum class ErrorKind {
    geometry,       ///< infeasible obstacle / bad mesh size request
    topology,       ///< mesh connectivity broken (boundary loop, pairing, orientation)
    input,          ///< malformed file, config, or argument
    coefficient,    ///< coefficient set outside the validated range
    compatibility,  ///< singular-system right-hand side not orthogonal to the kernel
    solver,         ///< linear or nonlinear solver failed / residual too large
    drift,          ///< bulk and surface drift averages disagree
    numeric,        ///< iteration failed to converge / produced non-finite values
};

const char* to_string(ErrorKind kind);

/// Single exception type carrying the failure category and a human-readable
/// message with the offending values.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace displab
