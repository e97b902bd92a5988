#pragma once

#include <stdexcept>
#include <string>

namespace mvreem {

/// Malformed or inconsistent input data (CSV contents, dataset invariants).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure while fitting a model.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid option or argument combination.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

[[noreturn]] void throw_data_error(const std::string& msg);

}  // namespace mvreem
