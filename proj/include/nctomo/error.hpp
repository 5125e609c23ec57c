#pragma once

#include <stdexcept>
#include <string>

namespace nctomo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (eta out of range,
/// |lambda| >= 1, n > k, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A polynomial or kernel order beyond what the tables were built for.
class OrderOutOfRange : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Internal cancellation made a result unreliable.
class PrecisionLoss : public Error {
 public:
  using Error::Error;
};

/// A Fock cutoff leaves more probability mass outside than allowed.
class CutoffTooSmall : public Error {
 public:
  using Error::Error;
};

/// An estimator refuses the request on statistical grounds, e.g. a
/// true-state reconstruction at eta <= 0.5 or too few blocks for a
/// covariance.
class EstimatorRefusal : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File input/output failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nctomo
