#pragma once

#include <stdexcept>
#include <string>

namespace scbcov {

/// Caller passed a value outside an operation's domain (bad order, negative
/// knot count, alpha outside (0,1), malformed model string, ...).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input data could not be used as given: ragged CSV rows, non-numeric cells,
/// too few grid points for the requested basis.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A factorization or iteration broke down (singular design, covariance
/// matrix not positive definite after jitter, all eigenvalues zero).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace scbcov
