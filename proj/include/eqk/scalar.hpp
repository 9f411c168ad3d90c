#pragma once

#include <functional>
#include <utility>

namespace eqk {

struct ScalarRoot {
  double x = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

// Root of a nondecreasing function on [lo, hi] with phi(lo) <= 0 <= phi(hi).
// `phi` returns (value, derivative). Newton steps are taken while they stay
// inside the bracket and shrink it fast enough; bisection otherwise.
// Stops once |phi(x)| <= tol * scale(x) or the bracket collapses to adjacent doubles.
// Throws SolverError after max_iterations.
ScalarRoot solve_monotone(const std::function<std::pair<double, double>(double)>& phi, double lo, double hi,
                          const std::function<double(double)>& scale, double tol = 1e-12,
                          int max_iterations = 200);

}  // namespace eqk
