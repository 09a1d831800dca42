#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ndhmc {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

/// Raised when a caller violates a precondition (shape mismatch, bad config).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation is requested for a model that cannot support it,
/// e.g. pattern-forced gradients on a smooth activation.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractError(message);
}

double dot(ConstSpan a, ConstSpan b);
double norm2(ConstSpan a);
double squared_norm(ConstSpan a);

}  // namespace ndhmc
