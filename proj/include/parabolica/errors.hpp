#pragma once

#include <stdexcept>
#include <string>

namespace parabolica {

/// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Input outside the domain of an operation (x outside [0,1], endpoint guard, ...).
struct DomainError : Error {
    using Error::Error;
};

/// An iterative kernel failed to converge (chart depth cap, root bracket, ODE underflow).
struct ConvergenceError : Error {
    using Error::Error;
};

/// A tree violates the structural contract (non-monotone, derivative <= 0, bad glue).
struct InvalidTreeError : Error {
    using Error::Error;
};

/// Malformed configuration or serialization input.
struct ConfigError : Error {
    using Error::Error;
};

} // namespace parabolica
