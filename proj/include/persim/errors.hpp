#pragma once

#include <stdexcept>
#include <string>

namespace persim {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files. Message carries file, line, and (when known) column.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, long line, long col, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + what),
        line_(line),
        col_(col) {}
  explicit ParseError(const std::string& what) : Error(what), line_(0), col_(0) {}
  long line() const { return line_; }
  long col() const { return col_; }

 private:
  long line_;
  long col_;
};

// Structurally valid input that violates a domain rule (out-of-range answers,
// unknown country codes, duplicate ids, ...). Message names the offenders.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad run configuration: unknown keys, invalid enum values, missing
// credentials, providers without the required capabilities.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Numeric argument outside the mathematical domain of an operation
// (temperature <= 0, degenerate scales, probabilities off the simplex).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Requested constraint cannot be met (e.g. a mean outside the attainable
// range of a tilted distribution).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A distribution was requested over zero valid observations.
class EmptyDistributionError : public Error {
 public:
  using Error::Error;
};

// Transport / provider failure. `retryable` distinguishes transient faults
// (timeouts, 429, 5xx) from permanent ones; `attempts` counts tries made.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable, int attempts = 1)
      : Error(what), retryable_(retryable), attempts_(attempts) {}
  bool retryable() const { return retryable_; }
  int attempts() const { return attempts_; }

 private:
  bool retryable_;
  int attempts_;
};

}  // namespace persim
