#pragma once

#include <stdexcept>
#include <string>

namespace tgmc {

/// Bad parameters or malformed input. Maps to CLI exit code 2.
class InvalidArgument : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was called outside its documented precondition.
class PreconditionViolation : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// Numerical failure (negative symbol, infinite entropy, I/O during
/// checkpointing). Maps to CLI exit code 3.
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A discretized covariance symbol came out negative beyond round-off.
class PositivityViolation : public NumericalFailure {
public:
  PositivityViolation(const std::string& what, int kx, int ky, double value)
      : NumericalFailure(what), kx_(kx), ky_(ky), value_(value) {}
  int kx() const { return kx_; }
  int ky() const { return ky_; }
  double value() const { return value_; }

private:
  int kx_;
  int ky_;
  double value_;
};

}  // namespace tgmc
