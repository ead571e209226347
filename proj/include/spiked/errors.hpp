#pragma once

#include <stdexcept>
#include <string>

namespace spiked {

/// Bad caller input: non-finite entries, shape mismatch, invalid parameters.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A quantity is undefined for the given arguments (e.g. the alpha grid for n < 8).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A search over a finite candidate set came up empty.
class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An enumeration would exceed its caller-supplied budget.
class SizeError : public std::length_error {
 public:
  SizeError(const std::string& what, double bound)
      : std::length_error(what), bound_(bound) {}
  double bound() const noexcept { return bound_; }

 private:
  double bound_;
};

/// An iterative method ran out of budget. Carries the best residual reached.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double best_residual)
      : std::runtime_error(what), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

/// Broken internal invariant (a step that cannot fail did).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace spiked
