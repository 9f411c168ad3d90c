#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "eqk/network.hpp"

// Small built-in networks used by `eqk verify`, the tests and the acceptance run.
namespace eqk::instances {

// One OD pair o -> d with `links` parallel edges.
Network parallel(const std::vector<CostParams>& links, double demand);

// Two BPR links: t_free (1, 2), capacity (1, 1), demand 10.
Network parallel2(double rho = 1.0, double mu_power = 1.0);

// Three BPR links: t_free (1, 2, 3), capacity (2, 3, 4), rho 0.15, mu_power 0.25, demand 10.
Network parallel3();

// 1 -> 2 -> 3, single OD 1 -> 3 with demand 5.
Network chain();

// a -> b, b -> c, a -> c with OD pairs (a, c, 4) and (b, c, 2).
Network triangle();

// n x n lattice with right and down edges; several OD pairs and sinks.
Network grid(std::size_t n = 3);

// s -> a, a <-> b, a -> t, b -> t: the only instance with a directed cycle.
Network two_cycle();

std::vector<std::string> names();
// Throws InputError for an unknown name.
Network by_name(std::string_view name);

}  // namespace eqk::instances
