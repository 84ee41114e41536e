#pragma once

#include <stdexcept>
#include <string>

namespace msmkit {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// numerics
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class SingularDesign : public Error {
 public:
  using Error::Error;
};
class NonConvergence : public Error {
 public:
  using Error::Error;
};
class Separation : public Error {
 public:
  using Error::Error;
};
class NotConverged : public Error {
 public:
  using Error::Error;
};

// data
class ParseError : public Error {
 public:
  using Error::Error;
};
class SchemaError : public Error {
 public:
  using Error::Error;
};
class ValidationError : public Error {
 public:
  using Error::Error;
};

// msm / missing-data methods
class EmptyRiskSet : public Error {
 public:
  using Error::Error;
};
class InsufficientCompleteCases : public Error {
 public:
  using Error::Error;
};
class MissingBaseline : public Error {
 public:
  using Error::Error;
};
class FailedImputation : public Error {
 public:
  using Error::Error;
};
class MTooSmall : public Error {
 public:
  using Error::Error;
};
class SparsePattern : public Error {
 public:
  using Error::Error;
};

// dgp / harness
class MechanismMismatch : public Error {
 public:
  using Error::Error;
};
class CalibrationFailed : public Error {
 public:
  using Error::Error;
};
class TooFewReplications : public Error {
 public:
  using Error::Error;
};
class TooManyFailures : public Error {
 public:
  using Error::Error;
};

// cli
class ConfigError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace msmkit
