#pragma once

#include <stdexcept>
#include <string>

namespace dstag {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent dimensions, missing paths, invalid option combinations.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input data: corpora, lexicons, embeddings, projection files.
// Carries a 1-based line number when one is known (-1 otherwise).
struct InputError : Error {
  explicit InputError(const std::string& what, long line = -1)
      : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")"
                        : what),
        line_number(line) {}
  long line_number;
};

// Non-finite values where finite ones are required (loss, gradients).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace dstag
