#pragma once

#include <stdexcept>
#include <string>

namespace talc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input, violated precondition or inconsistent dimensions.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numeric failure during fitting or inference (non-finite likelihood etc).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Protocol or transport failure talking to a completion endpoint.
class EndpointError : public Error {
public:
    using Error::Error;
};

}  // namespace talc
