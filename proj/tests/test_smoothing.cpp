#include <gtest/gtest.h>

#include <numeric>

#include "eqk/error.hpp"
#include "eqk/instances.hpp"
#include "eqk/smoothing.hpp"
#include "helpers.hpp"

namespace eqk {
namespace {

using test::E;

Network chain_unit() {
  return test::make_network({{"1", "2", test::linear(1)}, {"2", "3", test::linear(1)}}, {{"1", "3", 5}});
}

Network parallel_unit() {
  return test::make_network({{"1", "2", test::linear(1)}, {"1", "2", test::linear(2)}}, {{"1", "2", 10}});
}

// Independent reference: gamma * lse(-cost / gamma) over the simple paths.
double psi_brute(const Network& net, const std::vector<double>& t, double gamma, const OdPair& od) {
  std::vector<double> z;
  for_each_simple_path(net, od.origin, od.destination, net.vertex_count(), [&](std::span<const EdgeId> p) {
    double c = 0.0;
    for (EdgeId e : p) c += t[e];
    z.push_back(-c / gamma);
    return true;
  });
  return gamma * test::lse(z);
}

// Bellman-Ford shortest distance.
double shortest(const Network& net, const std::vector<double>& t, VertexId from, VertexId to) {
  std::vector<double> d(net.vertex_count(), std::numeric_limits<double>::infinity());
  d[from] = 0.0;
  for (std::size_t i = 0; i < net.vertex_count(); ++i) {
    for (EdgeId e = 0; e < net.edge_count(); ++e) {
      d[net.edge(e).head] = std::min(d[net.edge(e).head], d[net.edge(e).tail] + t[e]);
    }
  }
  return d[to];
}

std::vector<Network> acyclic_instances() {
  std::vector<Network> out;
  for (const auto& n : instances::names()) {
    if (n != "two-cycle") out.push_back(instances::by_name(n));
  }
  return out;
}

TEST(LogSumExp, Examples) {
  EXPECT_NEAR(log_sum_exp(std::vector<double>{0, 0}), std::log(2.0), 1e-15);
  EXPECT_EQ(log_sum_exp(std::vector<double>{kNoPath, 5}), 5.0);
  EXPECT_EQ(log_sum_exp(std::vector<double>{}), kNoPath);
  EXPECT_EQ(log_sum_exp(std::vector<double>{kNoPath, kNoPath}), kNoPath);
  const double big = log_sum_exp(std::vector<double>{1000, 1000});
  ASSERT_TRUE(std::isfinite(big));
  EXPECT_NEAR(big - 1000.0, std::log(2.0), 1e-12);
}

TEST(PsiSinkOrdered, Chain) {
  const auto net = chain_unit();
  const auto sink = test::vertex(net, "3");
  const auto table = psi_sink_ordered(net, {{1, 1}, 1.0}, topological_order(net, sink));
  EXPECT_DOUBLE_EQ(table.values[test::vertex(net, "1")], -2.0);
  EXPECT_DOUBLE_EQ(table.values[test::vertex(net, "2")], -1.0);
  EXPECT_EQ(table.values[sink], 0.0);
}

TEST(PsiSinkOrdered, ParallelEdges) {
  const auto net = parallel_unit();
  const auto table = psi_sink_ordered(net, {{1, 2}, 1.0}, topological_order(net, 1));
  EXPECT_NEAR(table.values[0], std::log(std::exp(-1.0) + std::exp(-2.0)), 1e-15);
  // The commonly quoted -0.686723 is rounded; the exact value is -0.6867383.
  EXPECT_NEAR(table.values[0], -0.686723, 2e-5);
}

TEST(PsiSinkOrdered, NoPathIsMinusInfinity) {
  const auto net = chain_unit();
  const auto table = psi_sink_ordered(net, {{1, 1}, 1.0}, topological_order(net, test::vertex(net, "2")));
  EXPECT_EQ(table.values[test::vertex(net, "3")], kNoPath);
}

TEST(PsiSinkOrdered, RejectsInvalidOrder) {
  const auto net = instances::two_cycle();
  const auto order = topological_order(net, test::vertex(net, "t"));
  ASSERT_FALSE(order.valid);
  EXPECT_THROW(psi_sink_ordered(net, {std::vector<double>(net.edge_count(), 1.0), 1.0}, order), InputError);
}

TEST(PsiSourceLayered, SingleEdge) {
  const auto net = test::make_network({{"i", "j", test::linear(3)}}, {{"i", "j", 1}});
  for (double gamma : {0.1, 1.0, 7.0}) {
    const auto table = psi_source_layered(net, {{3}, gamma}, 0, 1);
    EXPECT_DOUBLE_EQ(table.a(1, 1), -3.0);
    EXPECT_DOUBLE_EQ(table.b(1, 1), -3.0);
  }
}

TEST(PsiSourceLayered, Triangle) {
  const auto net = test::make_network(
      {{"i", "k", test::linear(1)}, {"k", "j", test::linear(1)}, {"i", "j", test::linear(3)}}, {{"i", "j", 1}});
  const auto table = psi_source_layered(net, {{1, 1, 3}, 1.0}, test::vertex(net, "i"), 2);
  EXPECT_NEAR(table.b(2, test::vertex(net, "j")), std::log(std::exp(-2.0) + std::exp(-3.0)), 1e-14);
  EXPECT_NEAR(table.b(2, test::vertex(net, "j")), -1.686723, 2e-5);
}

TEST(PsiSourceLayered, CycleAccumulatesWalks) {
  const auto net = instances::two_cycle();
  const auto table =
      psi_source_layered(net, {std::vector<double>(net.edge_count(), 1.0), 1.0}, test::vertex(net, "s"), 4);
  const auto t = test::vertex(net, "t");
  EXPECT_GT(table.b(3, t), table.b(2, t));
  EXPECT_GT(table.b(4, t), table.b(3, t));
}

TEST(PsiSourceLayered, RejectsZeroHorizon) {
  const auto net = chain_unit();
  EXPECT_THROW(psi_source_layered(net, {{1, 1}, 1.0}, 0, 0), InputError);
}

TEST(PsiTotal, Examples) {
  EXPECT_NEAR(psi_total(parallel_unit(), {{1, 2}, 1.0}), 10.0 * std::log(std::exp(-1.0) + std::exp(-2.0)), 1e-13);
  EXPECT_NEAR(psi_total(parallel_unit(), {{1, 2}, 1.0}), -6.86723, 2e-4);
  EXPECT_DOUBLE_EQ(psi_total(chain_unit(), {{1.5, 2.0}, 0.3}), -5.0 * 3.5);
}

TEST(PsiTotal, ShortestPathLimit) {
  std::mt19937_64 rng(3);
  for (const auto& net : acyclic_instances()) {
    const auto t = test::random_times(net, rng);
    double ref = 0.0;
    for (const auto& od : net.od_pairs()) ref -= od.demand * shortest(net, t, od.origin, od.destination);
    EXPECT_NEAR(psi_total(net, {t, 1e-6}), ref, 1e-3);
    EXPECT_NEAR(psi_total(net, {t, 0.0}), ref, 1e-12);
  }
}

TEST(FlowFromDual, Examples) {
  const auto f = flow_from_dual(parallel_unit(), {{1, 2}, 1.0});
  const double p1 = std::exp(-1.0) / (std::exp(-1.0) + std::exp(-2.0));
  EXPECT_NEAR(f[0], 10.0 * p1, 1e-13);
  EXPECT_NEAR(f[0], 7.310586, 1e-6);
  EXPECT_NEAR(f[1], 2.689414, 1e-6);

  const auto g = flow_from_dual(chain_unit(), {{1, 1}, 1.0});
  EXPECT_DOUBLE_EQ(g[0], 5.0);
  EXPECT_DOUBLE_EQ(g[1], 5.0);
}

TEST(SmoothingProperties, GradientIdentity) {
  std::mt19937_64 rng(21);
  for (const auto& name : instances::names()) {
    const auto net = instances::by_name(name);
    for (int trial = 0; trial < 20; ++trial) {
      const double gamma = 0.3 + trial * 0.1;
      const auto t = test::random_times(net, rng);
      const auto f = flow_from_dual(net, {t, gamma});
      const double h = 1e-4 * gamma;
      for (EdgeId e = 0; e < net.edge_count(); ++e) {
        auto tp = t, tm = t;
        tp[e] += h;
        tm[e] -= h;
        const double fd = -(psi_total(net, {tp, gamma}) - psi_total(net, {tm, gamma})) / (2 * h);
        EXPECT_NEAR(fd, f[e], 1e-5 * std::max(1.0, std::abs(f[e]))) << name << " edge " << e;
      }
    }
  }
}

TEST(SmoothingProperties, OrderedMatchesLayered) {
  std::mt19937_64 rng(22);
  for (const auto& net : acyclic_instances()) {
    const auto t = test::random_times(net, rng);
    for (const auto& od : net.od_pairs()) {
      const DualPoint dual{t, 0.7};
      const auto ordered = psi_sink_ordered(net, dual, topological_order(net, od.destination));
      const auto layered = psi_source_layered(net, dual, od.origin, net.vertex_count() - 1);
      const double a = ordered.values[od.origin];
      const double b = layered.b(net.vertex_count() - 1, od.destination);
      EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(SmoothingProperties, BruteForceEquivalence) {
  std::mt19937_64 rng(23);
  for (const auto& net : acyclic_instances()) {
    for (double gamma : {0.05, 1.0, 10.0}) {
      const auto t = test::random_times(net, rng);
      CharacteristicFunction cf(net);
      const auto values = cf.od_values(t, gamma);
      for (std::size_t w = 0; w < net.od_count(); ++w) {
        const double ref = psi_brute(net, t, gamma, net.od_pairs()[w]);
        EXPECT_NEAR(values[w], ref, 1e-10 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST(SmoothingProperties, MonotoneEnvelope) {
  std::mt19937_64 rng(24);
  for (const auto& name : instances::names()) {
    const auto net = instances::by_name(name);
    const auto t = test::random_times(net, rng);
    for (VertexId s = 0; s < net.vertex_count(); ++s) {
      const std::size_t h = net.vertex_count() + 2;
      const auto table = psi_source_layered(net, {t, 0.5}, s, h);
      for (std::size_t l = 1; l < h; ++l) {
        for (VertexId j = 0; j < net.vertex_count(); ++j) EXPECT_GE(table.b(l + 1, j), table.b(l, j));
      }
    }
  }
}

TEST(SmoothingProperties, Conservation) {
  std::mt19937_64 rng(25);
  for (const auto& name : instances::names()) {
    const auto net = instances::by_name(name);
    const auto f = flow_from_dual(net, {test::random_times(net, rng), 0.8});
    std::vector<double> balance(net.vertex_count(), 0.0);
    for (EdgeId e = 0; e < net.edge_count(); ++e) {
      EXPECT_GE(f[e], 0.0);
      balance[net.edge(e).tail] -= f[e];
      balance[net.edge(e).head] += f[e];
    }
    for (const auto& od : net.od_pairs()) {
      balance[od.origin] += od.demand;
      balance[od.destination] -= od.demand;
    }
    for (double b : balance) EXPECT_NEAR(b, 0.0, 1e-9 * net.total_demand()) << name;
  }
}

TEST(SmoothingProperties, TropicalLimit) {
  std::mt19937_64 rng(26);
  for (const auto& net : acyclic_instances()) {
    const auto t = test::random_times(net, rng);
    CharacteristicFunction cf(net);
    for (std::size_t w = 0; w < net.od_count(); ++w) {
      const auto& od = net.od_pairs()[w];
      const double best = shortest(net, t, od.origin, od.destination);
      // -gamma psi_w is a soft minimum: it stays below min_p g_p and rises to it as gamma shrinks.
      double prev = -std::numeric_limits<double>::infinity();
      for (double gamma : {1.0, 0.1, 0.01, 1e-4}) {
        const double v = -cf.od_values(t, gamma)[w];
        EXPECT_GE(v, prev - 1e-12);
        EXPECT_LE(v, best + 1e-12);
        prev = v;
      }
      // gamma ln |P_w| bounds the gap; no test instance has 100 paths per OD.
      EXPECT_NEAR(prev, best, 1e-4 * std::log(100.0));
    }
  }
}

TEST(SamplePath, ParallelFrequencies) {
  const auto net = parallel_unit();
  const DualPoint dual{{1, 2}, 1.0};
  const double p = 1.0 / (1.0 + std::exp(-1.0));
  EXPECT_NEAR(p, 0.731059, 1e-6);
  CharacteristicFunction cf(net);
  CharacteristicFunction::Sampler sampler(cf, 5);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += sampler.sample_path(dual.t, dual.gamma, 0).front() == 0;
  EXPECT_NEAR(static_cast<double>(hits) / n, p, 3.0 * std::sqrt(p * (1 - p) / n));
  // The one-shot entry point draws from the same distribution.
  const auto path = sample_path(net, dual, 0, 9);
  ASSERT_EQ(path.size(), 1u);
}

TEST(SamplePath, SinglePath) {
  const auto net = chain_unit();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_EQ(sample_path(net, {{1, 1}, 1.0}, 0, seed), (Path{0, 1}));
  }
}

TEST(SampleStochasticGradient, SinglePathIsDeterministic) {
  const auto g = sample_stochastic_gradient(chain_unit(), {{1, 1}, 1.0}, 4);
  EXPECT_EQ(g, (EdgeFlow{5.0, 5.0}));
}

TEST(SampleStochasticGradient, ParallelMean) {
  const auto net = parallel_unit();
  const DualPoint dual{{1, 2}, 1.0};
  CharacteristicFunction cf(net);
  CharacteristicFunction::Sampler sampler(cf, 77);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = sampler.sample_gradient(dual.t, dual.gamma)[0];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_NEAR(mean, flow_from_dual(net, dual)[0], 3.0 * se);
  EXPECT_NEAR(mean, 7.31, 0.05);
}

TEST(SampleStochasticGradient, OdFrequencies) {
  const auto net =
      test::make_network({{"a", "b", test::linear(1)}, {"c", "d", test::linear(1)}}, {{"a", "b", 1}, {"c", "d", 3}});
  CharacteristicFunction cf(net);
  CharacteristicFunction::Sampler sampler(cf, 8);
  const int n = 100000;
  int second = 0;
  for (int i = 0; i < n; ++i) {
    const auto g = sampler.sample_gradient(std::vector<double>{1, 1}, 1.0);
    second += g[1] > 0.0;
    EXPECT_EQ(g[0] + g[1], 4.0);
  }
  EXPECT_NEAR(static_cast<double>(second) / n, 0.75, 3.0 * std::sqrt(0.75 * 0.25 / n));
}

TEST(GumbelCheck, Examples) {
  const auto net = parallel_unit();
  EXPECT_NEAR(gumbel_check(net, {{1, 2}, 1.0}, 0, 1000000), -0.6867, 0.005);
  EXPECT_NEAR(gumbel_check(net, {{1, 2}, 0.1}, 0, 100000), -1.0, 0.05);
  const double single = gumbel_check(chain_unit(), {{1, 1}, 1.0}, 0, 100000);
  // Gumbel standard deviation is pi / sqrt(6) for unit scale.
  EXPECT_NEAR(single, -2.0, 3.0 * (M_PI / std::sqrt(6.0)) / std::sqrt(100000.0));
}

}  // namespace
}  // namespace eqk
