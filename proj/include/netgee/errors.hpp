#pragma once

#include <stdexcept>
#include <string>

namespace netgee {

// A linear system whose estimated condition exceeds the guard threshold
// (or an exactly singular factorization). Raised instead of returning
// garbage estimates.
class SingularSystemError : public std::runtime_error {
 public:
  explicit SingularSystemError(const std::string& what)
      : std::runtime_error(what) {}
};

// An iterative method ran out of iterations; carries the final residual.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// A Monte Carlo experiment exceeded its fit-failure budget.
class ExperimentError : public std::runtime_error {
 public:
  explicit ExperimentError(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace netgee
