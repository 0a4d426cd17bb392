#pragma once

#include <stdexcept>
#include <string>

namespace pedmr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A value violates the precondition of an operation (non-finite matrix, negative rate, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A density matrix with zero trace was used where a normalisable state is required.
class DegenerateState : public Error {
public:
    using Error::Error;
};

/// Inconsistent or incomplete configuration (spectral model, run config, kernel).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace pedmr
