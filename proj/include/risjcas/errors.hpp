#pragma once

#include <stdexcept>
#include <string>

namespace risjcas {

// Base of every error raised by the library. The C API maps each subclass to
// an error code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Angle or argument outside the domain where a formula is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

// (inv(Upsilon) - S) is numerically singular for the requested phases.
class SingularReflection : public Error {
 public:
  using Error::Error;
};

class QuadratureError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedBits : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

// Configuration problem. `line` is 1-based, 0 when unknown.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0)
      : Error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

// Optimizer could not continue (e.g. repeated singular candidates).
class NumericalAbort : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace risjcas
