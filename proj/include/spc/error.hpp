#pragma once

#include <stdexcept>
#include <string>

namespace spc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };    // malformed input file
struct PatternError : Error { using Error::Error; };  // sparse entry outside the assembled pattern
struct SolveError : Error { using Error::Error; };    // linear solve failed its residual contract
struct FieldError : Error { using Error::Error; };    // scalar field evaluated at phi <= 0
struct ConfigError : Error { using Error::Error; };   // scenario validation
struct StepError : Error { using Error::Error; };     // recoverable by step control (cut dt) failure

} // namespace spc
