#pragma once

#include <stdexcept>
#include <string>

namespace rdlab {

struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// structurally invalid model (reducible chain, non-expanding map, bad matrix)
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PreconditionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// iteration failed to reach tolerance; carries the final residual
struct ConvergenceError : std::runtime_error {
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual(residual) {}
    double residual;
};

// empirical threshold targets unreachable on the given window
struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// path window too short; carries the length that would have sufficed
struct WindowError : std::runtime_error {
    WindowError(const std::string& what, long required)
        : std::runtime_error(what), required(required) {}
    long required;
};

struct TruncationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    ConfigError(const std::string& what, int line = 0)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line(line) {}
    int line;
};

struct MembershipError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace rdlab
