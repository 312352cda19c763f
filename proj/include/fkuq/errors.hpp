#pragma once

#include <stdexcept>
#include <string>

namespace fkuq {

/// Bad input: malformed files, violated preconditions, inconsistent sizes.
class ValidationError : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

/// A computation could not be completed (singular system, non-finite state,
/// failed eigen solve, ...).
class NumericalError : public std::runtime_error
{
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fkuq
