#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "eqk/network.hpp"

namespace eqk {

// Marks "no path": the neutral element of log_sum_exp.
inline constexpr double kNoPath = -std::numeric_limits<double>::infinity();

// ln sum exp(v_i), max-shifted. Empty input or all kNoPath gives kNoPath.
double log_sum_exp(std::span<const double> values);

// gamma * ln sum exp(v_i / gamma); the gamma -> 0 limit (max) for gamma == 0.
double soft_max(std::span<const double> values, double gamma);

using EdgeFlow = std::vector<double>;
using Path = std::vector<EdgeId>;

// Dual iterate: per-edge times and the smoothing parameter.
struct DualPoint {
  std::vector<double> t;
  double gamma = 1.0;
};

// gamma * psi_{iv}(t / gamma) for every vertex i and one sink v: the smoothed
// (negated) shortest-path value. kNoPath for vertices that cannot reach the sink.
struct PotentialTable {
  VertexId sink = 0;
  std::vector<double> values;
};

// Source-based layered recursion: a(l, j) over walks with exactly l edges and
// b(l, j) over walks with at most l edges, l = 1..horizon.
struct LayeredTable {
  VertexId source = 0;
  std::size_t horizon = 0;
  std::size_t vertex_count = 0;
  std::vector<double> a_values, b_values;

  double a(std::size_t l, VertexId j) const { return a_values[(l - 1) * vertex_count + j]; }
  double b(std::size_t l, VertexId j) const { return b_values[(l - 1) * vertex_count + j]; }
};

// Single sweep in reverse topological order; O(m). Throws InputError for an invalid order.
PotentialTable psi_sink_ordered(const Network& network, const DualPoint& dual, const TopologicalOrder& order);

// a/b recursion from one source; O(horizon * m).
LayeredTable psi_source_layered(const Network& network, const DualPoint& dual, VertexId source, std::size_t horizon);

// Sum_w d_w * gamma * psi_w(t / gamma).
double psi_total(const Network& network, const DualPoint& dual);

// -grad of psi_total: expected edge loads under the Gibbs path distribution.
EdgeFlow flow_from_dual(const Network& network, const DualPoint& dual);

// One path of OD pair `od` drawn from the Gibbs distribution.
Path sample_path(const Network& network, const DualPoint& dual, std::size_t od, std::uint64_t rng_seed);

// Unbiased one-path estimate of flow_from_dual.
EdgeFlow sample_stochastic_gradient(const Network& network, const DualPoint& dual, std::uint64_t rng_seed);

// Monte Carlo estimate of E max_p (-g_p(t) + xi_p) with i.i.d. zero-mean Gumbel
// noise of scale gamma over the enumerated simple paths of `od`. Test oracle only.
double gumbel_check(const Network& network, const DualPoint& dual, std::size_t od, std::size_t n_samples,
                    std::uint64_t rng_seed = 1, std::size_t max_paths = 100000);

struct SmoothingOptions {
  // Walk-length bound for sinks whose reaching subgraph has a cycle; 0 means |V| - 1.
  std::size_t horizon = 0;
  // Worker threads for the per-sink fan-out; results are reduced in sink order.
  unsigned threads = 1;
};

// Per-network evaluator of gamma * psi(t / gamma) and its gradient.
//
// OD pairs are grouped by destination. A sink whose reaching subgraph is acyclic
// uses the ordered O(m) recursion; otherwise a time-expanded layered recursion over
// walks of at most `horizon` edges, which equals b^H of the source-based tables.
// gamma == 0 switches to shortest paths (all-or-nothing loads, lowest edge id on ties).
class CharacteristicFunction {
 public:
  explicit CharacteristicFunction(const Network& network, SmoothingOptions options = {});

  const Network& network() const { return network_; }
  std::size_t sink_count() const { return sinks_.size(); }
  std::size_t horizon() const { return horizon_; }
  bool all_ordered() const;

  // Sum_w d_w gamma psi_w(t / gamma); fills `flow` (size m) when non-null.
  double evaluate(std::span<const double> t, double gamma, EdgeFlow* flow = nullptr) const;

  // Per-OD values gamma psi_w(t / gamma).
  std::vector<double> od_values(std::span<const double> t, double gamma) const;

  // Max over paths of the edge count, per OD (walk horizon for cyclic sinks).
  std::vector<std::size_t> max_path_edges() const;

  // Upper bound on the Lipschitz constant of the gradient of gamma psi(t / gamma):
  // (1 / gamma) sum_w d_w max_p ||Theta^(p)||_2^2.
  double lipschitz_bound(double gamma) const;

  // Reusable per-call state for repeated path sampling.
  class Sampler {
   public:
    Sampler(const CharacteristicFunction& cf, std::uint64_t seed);
    Path sample_path(std::span<const double> t, double gamma, std::size_t od);
    // Draws w ~ d_w / sum d and one path; returns the path and loads sum_w d_w on it.
    EdgeFlow sample_gradient(std::span<const double> t, double gamma, Path* path = nullptr);
    std::mt19937_64& rng() { return rng_; }

   private:
    const CharacteristicFunction& cf_;
    std::mt19937_64 rng_;
    std::discrete_distribution<std::size_t> od_choice_;
  };

 private:
  struct SinkPlan {
    VertexId sink;
    std::vector<std::size_t> ods;
    TopologicalOrder order;
  };
  struct SinkResult {
    double value = 0.0;
    std::vector<double> od_values;
  };

  SinkResult evaluate_sink(const SinkPlan& plan, std::span<const double> t, double gamma, EdgeFlow* flow) const;
  SinkResult evaluate_ordered(const SinkPlan& plan, std::span<const double> t, double gamma, EdgeFlow* flow) const;
  SinkResult evaluate_layered(const SinkPlan& plan, std::span<const double> t, double gamma, EdgeFlow* flow) const;
  SinkResult evaluate_shortest(const SinkPlan& plan, std::span<const double> t, EdgeFlow* flow) const;
  std::vector<double> layered_potentials(const SinkPlan& plan, std::span<const double> t, double gamma) const;
  std::vector<double> shortest_potentials(VertexId sink, std::span<const double> t) const;
  const SinkPlan& plan_for_od(std::size_t od) const { return sinks_[od_sink_[od]]; }

  const Network& network_;
  SmoothingOptions options_;
  std::size_t horizon_;
  std::vector<SinkPlan> sinks_;
  std::vector<std::size_t> od_sink_;
};

}  // namespace eqk
