#pragma once

#include <stdexcept>
#include <string>

namespace etsf {

// Every failure raised by the library derives from Error. The CLI maps the
// concrete type onto an exit code (see exit_code()).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched tensor/array extents.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid hyperparameter or option (even kernel size, p >= 1, K too large).
class ConfigError : public Error {
public:
    using Error::Error;
};

// A scalar argument outside its mathematical domain (alpha not in (0,1)).
class DomainError : public Error {
public:
    using Error::Error;
};

// Bad or insufficient input data.
class DataError : public Error {
public:
    using Error::Error;
};

// Malformed CSV/JSON/checkpoint content; carries the offending line when known.
class ParseError : public DataError {
public:
    using DataError::DataError;
};

class IoError : public DataError {
public:
    using DataError::DataError;
};

// Non-finite values encountered during evaluation or training.
class NumericError : public Error {
public:
    using Error::Error;
};

// 0 ok, 1 usage, 2 data, 3 numeric failure.
inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e) != nullptr) return 3;
    if (dynamic_cast<const DataError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const DimensionError*>(&e) != nullptr) return 2;
    return 1;
}

}  // namespace etsf
