#pragma once

#include <stdexcept>
#include <string>

namespace bhmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value violates a documented invariant (parameters, observations, configs).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input data could not be read or parsed.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure could not produce a usable answer
/// (rank deficiency, non-finite values, no tensor component).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace bhmm
