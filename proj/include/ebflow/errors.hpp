#pragma once

#include <stdexcept>
#include <string>

namespace ebflow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition or malformed configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Non-finite iterate, failed factorization, degenerate data.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Sigma = sigma^2 I - tau^2 X X^T is not positive definite.
class NonPositiveSigma : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace ebflow
