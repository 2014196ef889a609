#pragma once

#include <stdexcept>
#include <string>

namespace polarpose {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation's preconditions (bad argument values,
/// degenerate geometry, dimension mismatches).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or its contents failed validation.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// A text format (PLY/OBJ/JSON) failed to parse. Carries the 1-based line
/// number when known (0 otherwise).
class ParseError : public LoadError {
 public:
  ParseError(const std::string& path, int line, const std::string& message)
      : LoadError(path + ":" + std::to_string(line) + ": " + message),
        line_(line) {}
  explicit ParseError(const std::string& message) : LoadError(message), line_(0) {}

  int line() const { return line_; }

 private:
  int line_;
};

/// A value is outside the declared range of its on-disk encoding.
class SaveError : public Error {
 public:
  using Error::Error;
};

/// The robust solver could not find a pose supported by enough inliers.
class NoPoseError : public Error {
 public:
  using Error::Error;
};

}  // namespace polarpose
