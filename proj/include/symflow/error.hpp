#pragma once

#include <stdexcept>
#include <string>

namespace symflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, records, arguments).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Unit-cell reconstruction from an asymmetric unit failed.
class ReconstructionError : public Error {
 public:
  using Error::Error;
};

/// A numerical quantity became non-finite or left its valid range.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace symflow
