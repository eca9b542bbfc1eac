#pragma once

#include <stdexcept>
#include <string>

namespace aide {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector lengths disagree with each other or with the configured X.
class DimensionError : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

class DuplicateIdError : public Error {
 public:
  using Error::Error;
};

// Document could not be parsed or is missing required fields.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class PerceptionError : public Error {
 public:
  using Error::Error;
};

// Raised by the remote client while the circuit breaker is open.
class CircuitOpenError : public PerceptionError {
 public:
  using PerceptionError::PerceptionError;
};

class ReasonerError : public PerceptionError {
 public:
  using PerceptionError::PerceptionError;
};

class ExplorationImpossible : public Error {
 public:
  using Error::Error;
};

}  // namespace aide
