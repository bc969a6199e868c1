#pragma once

#include <stdexcept>
#include <string>

namespace lgl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A structure family or enumeration would exceed the desk-scale caps.
class CapExceeded : public Error {
public:
    using Error::Error;
};

// The active-set projection ran past its iteration cap.
class NoConvergence : public Error {
public:
    using Error::Error;
};

// A pullback gradient callback returned non-finite values.
class DivergedGradient : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent configuration (maps to CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace lgl
