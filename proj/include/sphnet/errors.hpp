#pragma once

#include <stdexcept>
#include <string>

namespace sphnet {

/// Base class for all library errors.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape mismatch between matrix/vector operands.
class dimension_error : public error {
public:
    using error::error;
};

/// A documented precondition of an operation was violated.
class contract_error : public error {
public:
    using error::error;
};

/// Bad input data: CSV parse/schema problems, zero-norm rows, empty splits.
class data_error : public error {
public:
    using error::error;
};

/// Invalid run configuration (CLI flags, config file, dims/mus lists).
class config_error : public error {
public:
    using error::error;
};

/// NaN/Inf where a finite number is required, or a failed numeric sanity check.
class numeric_error : public error {
public:
    using error::error;
};

} // namespace sphnet
