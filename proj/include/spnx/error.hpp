#pragma once

#include <stdexcept>
#include <string>

namespace spnx {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV, schema, label sidecars).
class DataError : public Error {
  public:
    using Error::Error;
};

/// Structurally invalid model or malformed model document.
class ModelError : public Error {
  public:
    using Error::Error;
};

/// A query or argument that does not fit the model or operation contract.
class QueryError : public Error {
  public:
    using Error::Error;
};

} // namespace spnx
