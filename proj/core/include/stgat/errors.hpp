// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace stgat {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or graph dimensions.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid argument, configuration, or input data.
class ValueError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf values or other numeric failures.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or corrupt files: bad magic, version, checksum, schema.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem failures.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace stgat
