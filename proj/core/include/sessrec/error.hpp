#pragma once

#include <stdexcept>
#include <string>

namespace sessrec {

// Error taxonomy used for CLI exit codes: UsageError -> 1, DataError -> 2,
// anything else that escapes (NumericError, bad preconditions) -> 3.

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sessrec
