#pragma once

#include <stdexcept>
#include <string>

namespace semcom {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input. `pointer` is a JSON pointer into the offending document
// when the input came from JSON, empty otherwise.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what, std::string pointer = {})
      : Error(pointer.empty() ? what : pointer + ": " + what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

class EnumerationTooLarge : public Error {
 public:
  using Error::Error;
};

// x log(x/0) with x > 0: infinite divergence or infinite rate.
class SupportError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_gap)
      : Error(what), last_gap_(last_gap) {}
  double last_gap() const noexcept { return last_gap_; }

 private:
  double last_gap_;
};

// A checked property failed at runtime. `repro` holds a JSON document that
// reproduces the failure.
class InvariantViolation : public Error {
 public:
  InvariantViolation(const std::string& what, std::string repro = {})
      : Error(what), repro_(std::move(repro)) {}
  const std::string& repro() const noexcept { return repro_; }

 private:
  std::string repro_;
};

}  // namespace semcom
