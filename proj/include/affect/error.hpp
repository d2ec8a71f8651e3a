#pragma once

#include <stdexcept>
#include <string>

namespace affect {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes or feature widths disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// An operation argument is outside its valid range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Input statistics make the quantity undefined (zero variance, psi = 0).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// A model or training configuration is internally inconsistent.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Misuse of an API contract (e.g. backward on a non-scalar).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Missing or unusable data (empty split, missing stream).
class DataError : public Error {
public:
    using Error::Error;
};

/// A file could not be decoded; the message names the file and byte offset.
class ParseError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace affect
