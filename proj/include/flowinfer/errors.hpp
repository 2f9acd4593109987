#pragma once

#include <stdexcept>
#include <string>

namespace flowinfer {

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A field or vector refers to modes outside the index set it is paired with.
class IndexMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Query outside the time window covered by a trajectory.
class OutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Linear solve or time integration did not produce a usable result.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Reading or writing an artifact failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowinfer
