#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "eqk/network.hpp"
#include "eqk/path_solver.hpp"
#include "eqk/smoothing.hpp"

// Brute-force references for tests and `eqk verify`. Nothing here calls the
// smoothing or solver code; only network primitives and the cost functions.
namespace eqk::oracles {

struct OracleReport {
  std::string quantity;
  std::string oracle;
  double oracle_value = 0.0;
  double method_value = 0.0;
  double abs_deviation = 0.0;
  double rel_deviation = 0.0;  // abs / max(1, |oracle|)
  double tolerance = 0.0;
  bool pass = false;
};

// pass iff abs_deviation <= tolerance; callers scale the tolerance as needed.
OracleReport compare(std::string quantity, std::string oracle, double oracle_value, double method_value,
                     double tolerance);

// gamma psi_w(t / gamma) over the explicitly listed simple paths of OD `od`.
// Throws InputError above `max_paths` paths.
double psi_by_enumeration(const Network& network, const DualPoint& dual, std::size_t od,
                          std::size_t max_paths = 10000);

// Parallel-link instance: one OD pair and every edge going origin -> destination.
// Throws InputError otherwise.
void require_parallel(const Network& network);

// Logit equilibrium f_e = d exp(-tau_e(f_e) / gamma) / sum exp(...) by damped
// fixed-point iteration. The damping starts at 1/2 and is halved (up to 20 times)
// whenever an attempt fails to settle.
EdgeFlow logit_fixed_point_parallel(const Network& network, double gamma, double tol = 1e-12);

// Deterministic equilibrium: all used links share the minimal travel time.
// Found by bisection on that common time.
EdgeFlow wardrop_parallel(const Network& network, double tol = 1e-13);

// Projected gradient with a fixed small step on the path formulation.
std::vector<double> primal_minimize_tiny(const Network& network, const PathSet& paths, double gamma,
                                         std::size_t iters = 1000000, double step = 1e-3);

}  // namespace eqk::oracles
