#pragma once

#include <stdexcept>
#include <string>

namespace specgram {

// Base class for everything thrown by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied values: shape mismatches, broken type invariants,
// unparsable files.  CLI exit code 2.
struct ValidationError : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};

// Numerical failures: non-convergent fixed points, singular systems,
// unstable evaluations.  CLI exit code 3.
struct NumericalError : Error {
    using Error::Error;
};
struct IterationError : NumericalError {
    double last_residual;
    IterationError(const std::string& msg, double residual)
        : NumericalError(msg), last_residual(residual) {}
};
struct SingularityError : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace specgram
