#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace setoie {

// Base of every error raised by the library. The CLI maps subclasses to exit
// codes, so new error kinds should derive from one of the groups below.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data problems (exit code 2 at the CLI).
class DataError : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public DataError {
 public:
  using DataError::DataError;
};

class NoTriplet : public DataError {
 public:
  using DataError::DataError;
};

class BadAnnotation : public DataError {
 public:
  using DataError::DataError;
};

class TooLong : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  FormatError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  explicit FormatError(const std::string& what) : DataError(what) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_ = 0;
};

// Misuse of an API or inconsistent configuration.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class TooManyGold : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during optimization (exit code 3 at the CLI).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace setoie
