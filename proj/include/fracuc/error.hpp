#pragma once

#include <stdexcept>
#include <string>

namespace fracuc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed data, violated preconditions, out-of-domain parameters.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown: singular covariance, non-positive prediction variance,
/// optimizer failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace fracuc
