#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semb {

// Raised when a feature family, id, or user is not covered by the schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the loaders on malformed files or record-invariant violations.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the optimizer when a gradient goes non-finite; names the key.
class GradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when the validation loss turns NaN/Inf during training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace semb
