#pragma once

#include <stdexcept>
#include <string>

namespace groc {

// Base for all library errors. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (graph files, checkpoints, CSVs).
class DataError : public Error {
public:
    using Error::Error;
};

// Non-finite loss or gradient, or a primitive evaluated outside its domain.
class NumericalError : public Error {
public:
    using Error::Error;
};

// Invalid configuration keys or values.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace groc
