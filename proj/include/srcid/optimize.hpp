#pragma once

#include <functional>
#include <span>
#include <vector>

namespace srcid {

// Box constraints. Periodic coordinates wrap into [lower, upper) instead of
// being clamped.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> periodic;

  // Projects x into the box in place.
  void project(std::span<double> x) const;
};

struct NelderMeadOptions {
  int max_evaluations = 2000;
  // Converged when the simplex's function spread and extent both fall below these.
  double f_tolerance = 1e-10;
  double x_tolerance = 1e-8;
  // Restarts from a fresh simplex around the best point after a stall.
  int restarts = 1;
  std::vector<double> initial_step;  // per coordinate; empty -> 10% of |x0| or 0.1
};

struct OptimizeResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

// Derivative-free Nelder-Mead simplex minimization; every trial point is
// projected into `bounds` before evaluation.
OptimizeResult nelder_mead(const Objective& f, std::vector<double> x0, const Bounds& bounds,
                           const NelderMeadOptions& options = {});

}  // namespace srcid
