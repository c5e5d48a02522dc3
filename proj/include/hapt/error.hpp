#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hapt {

// Base class for every error raised by the library. `code()` is a short
// machine-readable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* code() const noexcept { return "error"; }
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "invalid_argument"; }
};

// An observation or query point outside the partition domain.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, double value, std::size_t sample)
      : Error(what), value_(value), sample_(sample) {}
  double value() const noexcept { return value_; }
  std::size_t sample() const noexcept { return sample_; }
  const char* code() const noexcept override { return "domain"; }

 private:
  double value_;
  std::size_t sample_;
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, int level, long long index, double achieved)
      : Error(what), level_(level), index_(index), achieved_(achieved) {}
  int level() const noexcept { return level_; }
  long long index() const noexcept { return index_; }
  double achieved_error() const noexcept { return achieved_; }
  const char* code() const noexcept override { return "quadrature"; }

 private:
  int level_;
  long long index_;
  double achieved_;
};

// A NaN or infinite integrand value. Always a bug upstream; never swallowed.
class NonFiniteError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "non_finite"; }
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }
  const char* code() const noexcept override { return "parse"; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* code() const noexcept override { return "io"; }
};

}  // namespace hapt
