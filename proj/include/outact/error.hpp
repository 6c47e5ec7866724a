#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace outact {

/// Violated precondition: shape mismatch, empty input, invalid configuration.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced or received a non-finite value, or a numeric
/// procedure (root bracketing, training) failed.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what,
                        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(what), index_(index) {}

  /// Offending element (parameter, pixel) when one can be named.
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  std::optional<std::size_t> index_;
};

/// Linear rescaling requested with x_min >= x_max.
class DegenerateContextError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Adaptive reliability diagram left with no predictions after filtering.
class EmptyDiagramError : public ContractError {
 public:
  using ContractError::ContractError;
};

}  // namespace outact
