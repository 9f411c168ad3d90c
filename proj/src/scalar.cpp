#include "eqk/scalar.hpp"

#include <cmath>
#include <string>
#include <tuple>

#include "eqk/error.hpp"

namespace eqk {

ScalarRoot solve_monotone(const std::function<std::pair<double, double>(double)>& phi, double lo, double hi,
                          const std::function<double(double)>& scale, double tol, int max_iterations) {
  auto [f_lo, d_lo] = phi(lo);
  if (f_lo >= 0.0) return {lo, f_lo, 0};
  auto [f_hi, d_hi] = phi(hi);
  if (f_hi <= 0.0) return {hi, f_hi, 0};

  // Start from the end closer to the root in the secant sense.
  double x = hi;
  double fx = f_hi, dx = d_hi;
  double best_x = x, best_res = std::abs(fx);
  double last_width = hi - lo;
  for (int it = 1; it <= max_iterations; ++it) {
    if (std::abs(fx) <= tol * scale(x)) return {x, fx, it};
    if (fx < 0.0) lo = x; else hi = x;

    double next = std::nan("");
    if (std::isfinite(dx) && dx > 0.0) next = x - fx / dx;
    const double width = hi - lo;
    if (!(next > lo && next < hi) || width > 0.5 * last_width) {
      next = lo + 0.5 * (hi - lo);
      // Wide positive brackets shrink in log space.
      if (lo >= 0.0 && hi > 1.0 && hi > 16.0 * lo) next = std::sqrt(std::max(lo, 1.0) * hi);
    }
    last_width = width;
    if (next <= lo || next >= hi) {
      // Bracket is down to adjacent doubles; return the better end.
      const auto [flo, dl] = phi(lo);
      const auto [fhi, dh] = phi(hi);
      (void)dl;
      (void)dh;
      return std::abs(flo) <= std::abs(fhi) ? ScalarRoot{lo, flo, it} : ScalarRoot{hi, fhi, it};
    }
    x = next;
    std::tie(fx, dx) = phi(x);
    if (std::abs(fx) < best_res) {
      best_res = std::abs(fx);
      best_x = x;
    }
  }
  throw SolverError("scalar root finder did not converge in " + std::to_string(max_iterations) +
                    " iterations (best x=" + std::to_string(best_x) + ", residual=" + std::to_string(best_res) + ")");
}

}  // namespace eqk
