// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <stdexcept>
#include <string>

namespace dpr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed, missing or inconsistent input data (bad files, dangling ids, ...).
class DataError : public Error {
  public:
    using Error::Error;
};

/// Text that normalizes to zero tokens.
class EmptyTextError : public DataError {
  public:
    using DataError::DataError;
};

class IoError : public Error {
  public:
    using Error::Error;
};

/// Non-finite loss, score or embedding.
class NumericError : public Error {
  public:
    using Error::Error;
};

/// Caller violated a documented precondition.
class UsageError : public Error {
  public:
    using Error::Error;
};

}  // namespace dpr
