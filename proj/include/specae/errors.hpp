#pragma once

#include <stdexcept>
#include <string>

namespace specae {

/// Shape disagreement between operands.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation (log/sqrt of negatives).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Caller broke a precondition that is not about shapes.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Factorization or evaluation produced an unusable number.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Training loss went non-finite.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace specae
