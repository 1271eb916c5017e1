#pragma once

#include <stdexcept>
#include <string>

namespace fleetlife {

// Base for all recoverable failures raised by the library. The CLI maps
// these to exit code 2; anything else escaping main() is a bug.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A required column is absent or the file layout is unusable.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A row holds a malformed required field; the message lists row numbers.
class ParseError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

class EmptyRiskSetError : public Error {
 public:
  using Error::Error;
};

// A value violates a documented domain contract (range, ordering, dimension).
class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateFeatureError : public Error {
 public:
  using Error::Error;
};

class SeparationError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

}  // namespace fleetlife
