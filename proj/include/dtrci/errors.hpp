#pragma once

#include <stdexcept>
#include <string>

namespace dtrci {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration; the CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A method/configuration combination outside the supported envelope.
class UnsupportedMethodError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Input data that does not conform to the design; exit code 3.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, long row = -1)
      : Error(row >= 0 ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}
  long row() const { return row_; }

 private:
  long row_;
};

// Numerical breakdown (singular design, non-finite output); exit code 4.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularDesignError : public NumericalError {
 public:
  SingularDesignError(const std::string& what, double condition)
      : NumericalError(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

}  // namespace dtrci
