#pragma once

#include <stdexcept>
#include <string>

namespace f2b {

enum class ErrorKind {
  Domain,
  Parse,
  Integrity,
  Format,
  Corruption,
  Validation,
  Io,
  Convergence,
  Capacity,
  UndefinedCorrelation,
};

const char* to_string(ErrorKind kind) noexcept;

// Every failure in the core surfaces as an Error; the kind drives the C API
// status code and the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double max_violation)
      : Error(ErrorKind::Convergence, what), max_violation_(max_violation) {}
  double max_violation() const noexcept { return max_violation_; }

 private:
  double max_violation_;
};

class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::size_t achievable)
      : Error(ErrorKind::Capacity, what), achievable_(achievable) {}
  std::size_t achievable() const noexcept { return achievable_; }

 private:
  std::size_t achievable_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace f2b
