#pragma once

#include <stdexcept>
#include <string>

namespace fracheat {

// Bad parameters or configuration (CLI exit code 1).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of a function.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Input data malformed (NaN, shape mismatch).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluation at a singular point (phi on the diagonal, singular Gram matrix).
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameters outside the regime where the quantity is defined (CLI exit code 2).
class RegimeError : public std::runtime_error {
 public:
  RegimeError(std::string condition, const std::string& detail)
      : std::runtime_error("regime violation: " + condition +
                           (detail.empty() ? "" : " (" + detail + ")")),
        condition_(std::move(condition)) {}
  const std::string& condition() const { return condition_; }

 private:
  std::string condition_;
};

}  // namespace fracheat
