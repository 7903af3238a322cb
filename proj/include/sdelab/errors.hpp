#pragma once

#include <stdexcept>
#include <string>

namespace sdelab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: unsorted breakpoints, bad radii, inconsistent sizes.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// `at` evaluation on a breakpoint whose one-sided limits disagree.
class AmbiguityError : public Error {
public:
    using Error::Error;
};

/// A diffusion coefficient vanishes where it must not.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

/// An operation was called outside its documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A requested time or value lies outside the reachable range.
class RangeError : public Error {
public:
    using Error::Error;
};

/// A transform could not be built with the requested parameters.
class ConstructionError : public Error {
public:
    using Error::Error;
};

/// A numerical certificate (Lipschitz quotient, monotonicity) failed.
class CertificationError : public Error {
public:
    using Error::Error;
};

/// A solver produced a non-finite state.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : Error(what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// An adaptive method exceeded its query cap.
class NonTerminationError : public Error {
public:
    using Error::Error;
};

/// Not enough samples or points for a statistic.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment specification or command line.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace sdelab
