#include <gtest/gtest.h>

#include "eqk/error.hpp"
#include "eqk/instances.hpp"
#include "eqk/oracles.hpp"
#include "eqk/path_solver.hpp"
#include "helpers.hpp"

namespace eqk {
namespace {

using oracles::compare;

TEST(Compare, PassIffWithinTolerance) {
  const auto a = compare("q", "o", 1.0, 1.0 + 1e-7, 1e-6);
  EXPECT_TRUE(a.pass);
  EXPECT_GE(a.abs_deviation, 0.0);
  EXPECT_GE(a.rel_deviation, 0.0);
  const auto b = compare("q", "o", -5.0, -5.1, 1e-3);
  EXPECT_FALSE(b.pass);
  EXPECT_NEAR(b.abs_deviation, 0.1, 1e-12);
  EXPECT_NEAR(b.rel_deviation, 0.02, 1e-12);
}

TEST(PsiByEnumeration, Examples) {
  const auto p2 = instances::parallel2();
  EXPECT_NEAR(oracles::psi_by_enumeration(p2, {{1, 2}, 1.0}, 0), std::log(std::exp(-1.0) + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(oracles::psi_by_enumeration(p2, {{1, 2}, 1.0}, 0), -0.686723, 2e-5);
  EXPECT_DOUBLE_EQ(oracles::psi_by_enumeration(instances::chain(), {{1.5, 2}, 0.4}, 0), -3.5);
  const auto grid = instances::grid(3);
  EXPECT_NEAR(oracles::psi_by_enumeration(grid, {std::vector<double>(grid.edge_count(), 1.0), 1.0}, 0),
              std::log(6.0) - 4.0, 1e-14);
  EXPECT_THROW(oracles::psi_by_enumeration(grid, {std::vector<double>(grid.edge_count(), 1.0), 1.0}, 0, 5),
               InputError);
}

TEST(LogitFixedPoint, Examples) {
  const auto p = CostParams::bpr(1, 2, 0.15, 0.25);
  const auto f = oracles::logit_fixed_point_parallel(instances::parallel({p, p, p}, 9.0), 0.7);
  for (double v : f) EXPECT_NEAR(v, 3.0, 1e-10);

  const auto constant = instances::parallel2(0.0, 1.0);
  EXPECT_NEAR(oracles::logit_fixed_point_parallel(constant, 1.0)[0], 10.0 / (1.0 + std::exp(-1.0)), 1e-10);
  EXPECT_NEAR(oracles::logit_fixed_point_parallel(constant, 1.0)[0], 7.310586, 1e-6);

  const auto bpr = instances::parallel2();
  const auto g = oracles::logit_fixed_point_parallel(bpr, 1e-3);
  EXPECT_LE(std::abs(edge_cost(bpr.edge(0).cost, g[0]) - edge_cost(bpr.edge(1).cost, g[1])), 1e-2);
  EXPECT_THROW(oracles::logit_fixed_point_parallel(instances::chain(), 1.0), InputError);
}

TEST(Wardrop, Examples) {
  const auto p = CostParams::bpr(1, 1, 0.15, 0.25);
  const auto f = oracles::wardrop_parallel(instances::parallel({p, p}, 2.0));
  EXPECT_NEAR(f[0], 1.0, 1e-10);
  EXPECT_NEAR(f[1], 1.0, 1e-10);

  // tau_1 = 1 + f, tau_2 = 2 + f.
  const auto lin = instances::parallel({test::linear(1, 1), test::linear(2, 1)}, 3.0);
  const auto g = oracles::wardrop_parallel(lin);
  EXPECT_NEAR(g[0], 2.0, 1e-10);
  EXPECT_NEAR(g[1], 1.0, 1e-10);
  EXPECT_NEAR(edge_cost(lin.edge(0).cost, g[0]), 3.0, 1e-10);

  const auto dominant = instances::parallel({CostParams::bpr(100, 1, 0.15, 0.25), p}, 2.0);
  const auto h = oracles::wardrop_parallel(dominant);
  EXPECT_EQ(h[0], 0.0);
  EXPECT_NEAR(h[1], 2.0, 1e-12);
}

TEST(PrimalMinimizeTiny, MatchesPathSolver) {
  const auto net = instances::parallel2();
  const auto paths = enumerate_all_paths(net);
  PathSolverConfig c;
  c.epsilon = 1e-10;
  const auto sol = solve_path_fgm(net, paths, c);
  const auto x = oracles::primal_minimize_tiny(net, paths, 1.0);
  EXPECT_NEAR(primal_objective(net, paths, x, 1.0), primal_objective(net, paths, sol.x, 1.0), 1e-6);
}

TEST(PrimalMinimizeTiny, LargeGammaIsUniform) {
  const auto net = instances::parallel3();
  const auto paths = enumerate_all_paths(net);
  const auto x = oracles::primal_minimize_tiny(net, paths, 1e4, 20000, 1e-5);
  for (double v : x) EXPECT_NEAR(v, 10.0 / 3.0, 1e-3);
}

TEST(PrimalMinimizeTiny, BeatsRandomPoints) {
  const auto net = instances::triangle();
  const auto paths = enumerate_all_paths(net);
  const auto x = oracles::primal_minimize_tiny(net, paths, 0.5, 200000);
  const double best = primal_objective(net, paths, x, 0.5);
  std::mt19937_64 rng(71);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    auto y = uniform_path_flow(paths);
    for (std::size_t w = 0; w < paths.od_count(); ++w) {
      double s = 0.0;
      for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) s += (y[p] = u(rng));
      for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) y[p] *= paths.demand(w) / s;
    }
    EXPECT_LE(best, primal_objective(net, paths, y, 0.5));
  }
}

TEST(Oracles, Deterministic) {
  const auto net = instances::parallel3();
  EXPECT_EQ(oracles::logit_fixed_point_parallel(net, 0.5), oracles::logit_fixed_point_parallel(net, 0.5));
  EXPECT_EQ(oracles::wardrop_parallel(net), oracles::wardrop_parallel(net));
  const auto paths = enumerate_all_paths(net);
  EXPECT_EQ(oracles::primal_minimize_tiny(net, paths, 1.0, 1000), oracles::primal_minimize_tiny(net, paths, 1.0, 1000));
}

}  // namespace
}  // namespace eqk
