#pragma once

#include <stdexcept>
#include <string>

namespace beamvi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// cay^{-1} / tau^{-1} evaluated at a rotation by (nearly) +-pi.
class NearPiRotation : public Error {
 public:
  using Error::Error;
};

class NonPositiveParam : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

/// A discrete Legendre solve failed to reach its tolerance.
class NewtonDivergence : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration text; carries the offending line when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Well-formed configuration with an invalid value; names the field.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace beamvi
