#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qmfg {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationIssue {
  enum class Code { NonPositiveParameter, AlphaOutOfRange, DegenerateGrid };
  Code code;
  std::string field;
  std::string message;
};

/// Thrown by the throwing validation entry point; carries every violated
/// invariant, not just the first.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<ValidationIssue> issues)
      : Error(format(issues)), issues_(std::move(issues)) {}
  const std::vector<ValidationIssue>& issues() const { return issues_; }

 private:
  static std::string format(const std::vector<ValidationIssue>& issues);
  std::vector<ValidationIssue> issues_;
};

class AlphaOutOfRange : public Error {
 public:
  using Error::Error;
};

class EmptySample : public Error {
 public:
  using Error::Error;
};

class NonFiniteSample : public Error {
 public:
  using Error::Error;
};

class NegativeVariance : public Error {
 public:
  using Error::Error;
};

class InvalidLaw : public Error {
 public:
  using Error::Error;
};

class TimeOutOfRange : public Error {
 public:
  using Error::Error;
};

class GridTooNarrow : public Error {
 public:
  using Error::Error;
};

class QuadratureUnderflow : public Error {
 public:
  using Error::Error;
};

class MassLoss : public Error {
 public:
  using Error::Error;
};

class PathsNotStored : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qmfg
