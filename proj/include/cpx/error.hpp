#pragma once

#include <stdexcept>
#include <string>

namespace cpx {

// Bad input or configuration. The CLI maps this to exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Arithmetic breakdown during inference. The CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cpx
