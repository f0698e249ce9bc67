// errors.hpp: exception types shared by the toolkit.
//
// Each category maps onto one CLI exit code (see tools/spinbath.cpp).

#pragma once

#include <stdexcept>
#include <string>

namespace spinbath {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or parameters violating a type invariant.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed input data (CSV rows, measurement records).
class DataError : public Error {
public:
    using Error::Error;
};

// Iterative solver or eigensolver failed to converge.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// Fit problem has no identifiable solution.
class UnidentifiableError : public Error {
public:
    using Error::Error;
};

}  // namespace spinbath
