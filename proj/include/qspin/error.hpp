#pragma once

#include <stdexcept>
#include <string>

namespace qspin {

/// Raised when an argument violates an operation's precondition.
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation is asked for a mode it has no defined answer in
/// (e.g. the torus-only Mecke closed form on a free window).
class Unsupported : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Numerical routine failed to reach its tolerance within its work cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qspin
