#include "eqk/instances.hpp"

#include <string>

#include "eqk/error.hpp"

namespace eqk::instances {

Network parallel(const std::vector<CostParams>& links, double demand) {
  std::vector<Edge> edges;
  for (const auto& c : links) edges.push_back({0, 1, c});
  return Network({"o", "d"}, std::move(edges), {{0, 1, demand}});
}

Network parallel2(double rho, double mu_power) {
  return parallel({CostParams::bpr(1.0, 1.0, rho, mu_power), CostParams::bpr(2.0, 1.0, rho, mu_power)}, 10.0);
}

Network parallel3() {
  return parallel({CostParams::bpr(1.0, 2.0, 0.15, 0.25), CostParams::bpr(2.0, 3.0, 0.15, 0.25),
                   CostParams::bpr(3.0, 4.0, 0.15, 0.25)},
                  10.0);
}

Network chain() {
  return Network({"1", "2", "3"},
                 {{0, 1, CostParams::bpr(1.0, 5.0, 0.15, 0.25)}, {1, 2, CostParams::bpr(2.0, 5.0, 0.15, 0.25)}},
                 {{0, 2, 5.0}});
}

Network triangle() {
  return Network({"a", "b", "c"},
                 {{0, 1, CostParams::bpr(1.0, 3.0, 0.5, 0.5)},
                  {1, 2, CostParams::bpr(1.0, 4.0, 0.5, 0.5)},
                  {0, 2, CostParams::bpr(2.5, 2.0, 0.5, 0.5)}},
                 {{0, 2, 4.0}, {1, 2, 2.0}});
}

Network grid(std::size_t n) {
  if (n < 2) throw InputError("grid needs n >= 2");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) names.push_back(std::to_string(i) + "," + std::to_string(j));
  }
  auto id = [n](std::size_t i, std::size_t j) { return i * n + j; };
  std::vector<Edge> edges;
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j, ++k) {
      // Deterministic spread of parameters so that no two routes tie exactly.
      const double t = 1.0 + 0.25 * static_cast<double>((3 * k) % 5);
      const double cap = 2.0 + static_cast<double>(k % 3);
      if (j + 1 < n) edges.push_back({id(i, j), id(i, j + 1), CostParams::bpr(t, cap, 0.15, 0.25)});
      if (i + 1 < n) edges.push_back({id(i, j), id(i + 1, j), CostParams::bpr(t + 0.5, cap, 0.15, 0.25)});
    }
  }
  const std::size_t last = n - 1;
  std::vector<OdPair> ods{{id(0, 0), id(last, last), 6.0}, {id(0, 1), id(last, last), 2.0},
                          {id(0, 0), id(last, last - 1), 3.0}, {id(1, 0), id(1, last), 1.5}};
  return Network(std::move(names), std::move(edges), std::move(ods));
}

Network two_cycle() {
  return Network({"s", "a", "b", "t"},
                 {{0, 1, CostParams::bpr(1.0, 2.0, 0.15, 0.25)},
                  {1, 2, CostParams::bpr(0.5, 2.0, 0.15, 0.25)},
                  {2, 1, CostParams::bpr(0.5, 2.0, 0.15, 0.25)},
                  {1, 3, CostParams::bpr(2.0, 2.0, 0.15, 0.25)},
                  {2, 3, CostParams::bpr(1.0, 2.0, 0.15, 0.25)}},
                 {{0, 3, 3.0}});
}

std::vector<std::string> names() { return {"parallel-2", "parallel-3", "chain", "triangle", "grid-3x3", "two-cycle"}; }

Network by_name(std::string_view name) {
  if (name == "parallel-2") return parallel2();
  if (name == "parallel-3") return parallel3();
  if (name == "chain") return chain();
  if (name == "triangle") return triangle();
  if (name == "grid-3x3") return grid(3);
  if (name == "two-cycle") return two_cycle();
  throw InputError("unknown instance '" + std::string(name) + "'");
}

}  // namespace eqk::instances
