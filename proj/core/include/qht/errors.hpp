#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qht {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotHermitian : public Error {
 public:
  using Error::Error;
};

// Carries the full list of violated state invariants so callers can report
// every problem with an input at once, not just the first.
class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(std::vector<std::string> violations)
      : Error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& vs) {
    std::string out = "state invariants violated:";
    for (const auto& v : vs) out += " [" + v + "]";
    return out;
  }
  std::vector<std::string> violations_;
};

// Tensor-power dimension would exceed the configured budget.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(std::int64_t required_dim, std::int64_t budget)
      : Error("tensor power needs dimension " + std::to_string(required_dim) +
              ", budget is " + std::to_string(budget)),
        required_dim_(required_dim),
        budget_(budget) {}
  std::int64_t required_dim() const { return required_dim_; }
  std::int64_t budget() const { return budget_; }

 private:
  std::int64_t required_dim_;
  std::int64_t budget_;
};

// Exact convolution grew past the configured atom cap.
class AtomBudgetExceeded : public Error {
 public:
  AtomBudgetExceeded(std::int64_t atoms, std::int64_t budget)
      : Error("convolution reached " + std::to_string(atoms) +
              " atoms, budget is " + std::to_string(budget)),
        atoms_(atoms) {}
  std::int64_t atoms() const { return atoms_; }

 private:
  std::int64_t atoms_;
};

class DegenerateVariance : public Error {
 public:
  using Error::Error;
};

class NotProjector : public Error {
 public:
  using Error::Error;
};

class NotNormalized : public Error {
 public:
  using Error::Error;
};

// Relative-entropy support condition failed for a rank-deficient sigma.
class SupportViolation : public Error {
 public:
  using Error::Error;
};

class ToleranceNotReached : public Error {
 public:
  ToleranceNotReached(double gap, double tol)
      : Error("certified gap " + std::to_string(gap) +
              " above tolerance " + std::to_string(tol)),
        gap_(gap) {}
  double gap() const { return gap_; }

 private:
  double gap_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace qht
