#pragma once

#include <stdexcept>
#include <string>

namespace basecap {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the operation's domain (bad time, non-positive capacity, grid mismatch).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Parameter set violating a model invariant; raised before any computation.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Root finder could not bracket or converge.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Non-finite intermediate value (NaN/inf Monte Carlo estimate, overflow).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The capacity grid of the stopping oracle does not contain the free boundary.
class CoverageError : public Error {
public:
    using Error::Error;
};

}  // namespace basecap
