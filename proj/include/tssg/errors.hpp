#pragma once

#include <stdexcept>
#include <string>

namespace tssg {

/// Bad argument to a public operation (negative distance, k > points, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Operation applied to an object whose state does not allow it
/// (all-zero belief, zero-weight cluster, lost track).
class InvalidState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A matrix that must be symmetric positive-definite could not be factorized,
/// even after one diagonal jitter.
class FactorizationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values produced inside an iterative method.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tssg
