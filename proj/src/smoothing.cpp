#include "eqk/smoothing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <thread>

#include "eqk/error.hpp"

namespace eqk {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNoPath;
  const double top = *std::max_element(values.begin(), values.end());
  if (top == kNoPath) return kNoPath;
  if (std::isinf(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

double soft_max(std::span<const double> values, double gamma) {
  if (values.empty()) return kNoPath;
  const double top = *std::max_element(values.begin(), values.end());
  if (top == kNoPath || gamma == 0.0 || std::isinf(top)) return top;
  double sum = 0.0;
  for (double v : values) sum += std::exp((v - top) / gamma);
  return top + gamma * std::log(sum);
}

namespace {

// Probabilities proportional to exp(z_i / gamma); entries at kNoPath get 0.
// The largest weight is normalized to 1 before dividing, so every ratio has the
// form 1 / (1 + sum exp(differences)).
void gibbs_weights(std::span<const double> z, double gamma, std::vector<double>& p) {
  p.assign(z.size(), 0.0);
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = z[i] == kNoPath ? 0.0 : std::exp((z[i] - top) / gamma);
    sum += p[i];
  }
  for (auto& x : p) x /= sum;
}

std::size_t draw(const std::vector<double>& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng);
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last_positive = i;
    if (r < p[i]) return i;
    r -= p[i];
  }
  return last_positive;
}

void require_dual(const Network& network, std::span<const double> t, double gamma) {
  if (t.size() != network.edge_count()) {
    throw InputError("dual point has " + std::to_string(t.size()) + " entries, network has " +
                     std::to_string(network.edge_count()) + " edges");
  }
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InputError("gamma must be finite and nonnegative");
  for (double x : t) {
    if (!std::isfinite(x)) throw InputError("dual point has a non-finite component");
  }
}

}  // namespace

PotentialTable psi_sink_ordered(const Network& network, const DualPoint& dual, const TopologicalOrder& order) {
  if (!order.valid) throw InputError("psi_sink_ordered requires a valid topological order");
  require_dual(network, dual.t, dual.gamma);
  PotentialTable table{order.sink, std::vector<double>(network.vertex_count(), kNoPath)};
  table.values[order.sink] = 0.0;
  std::vector<double> z;
  for (auto it = order.order.rbegin(); it != order.order.rend(); ++it) {
    const VertexId v = *it;
    if (v == order.sink) continue;
    z.clear();
    for (EdgeId e : network.out_edges(v)) z.push_back(table.values[network.edge(e).head] - dual.t[e]);
    table.values[v] = soft_max(z, dual.gamma);
  }
  return table;
}

LayeredTable psi_source_layered(const Network& network, const DualPoint& dual, VertexId source,
                                std::size_t horizon) {
  if (horizon < 1) throw InputError("layered recursion needs horizon >= 1");
  require_dual(network, dual.t, dual.gamma);
  const std::size_t n = network.vertex_count();
  LayeredTable table;
  table.source = source;
  table.horizon = horizon;
  table.vertex_count = n;
  table.a_values.assign(horizon * n, kNoPath);
  table.b_values.assign(horizon * n, kNoPath);
  std::vector<double> z;

  // l = 1: single edges out of the source (parallel edges aggregate).
  for (VertexId j = 0; j < n; ++j) {
    z.clear();
    for (EdgeId e : network.in_edges(j)) {
      if (network.edge(e).tail == source) z.push_back(-dual.t[e]);
    }
    table.a_values[j] = soft_max(z, dual.gamma);
    table.b_values[j] = table.a_values[j];
  }
  for (std::size_t l = 1; l < horizon; ++l) {
    const double* a_prev = &table.a_values[(l - 1) * n];
    double* a_next = &table.a_values[l * n];
    const double* b_prev = &table.b_values[(l - 1) * n];
    double* b_next = &table.b_values[l * n];
    for (VertexId j = 0; j < n; ++j) {
      z.clear();
      for (EdgeId e : network.in_edges(j)) z.push_back(a_prev[network.edge(e).tail] - dual.t[e]);
      a_next[j] = soft_max(z, dual.gamma);
      const double pair[2] = {b_prev[j], a_next[j]};
      b_next[j] = soft_max(pair, dual.gamma);
    }
  }
  return table;
}

double psi_total(const Network& network, const DualPoint& dual) {
  return CharacteristicFunction(network).evaluate(dual.t, dual.gamma);
}

EdgeFlow flow_from_dual(const Network& network, const DualPoint& dual) {
  EdgeFlow flow;
  CharacteristicFunction(network).evaluate(dual.t, dual.gamma, &flow);
  return flow;
}

Path sample_path(const Network& network, const DualPoint& dual, std::size_t od, std::uint64_t rng_seed) {
  CharacteristicFunction cf(network);
  CharacteristicFunction::Sampler sampler(cf, rng_seed);
  return sampler.sample_path(dual.t, dual.gamma, od);
}

EdgeFlow sample_stochastic_gradient(const Network& network, const DualPoint& dual, std::uint64_t rng_seed) {
  CharacteristicFunction cf(network);
  CharacteristicFunction::Sampler sampler(cf, rng_seed);
  return sampler.sample_gradient(dual.t, dual.gamma);
}

double gumbel_check(const Network& network, const DualPoint& dual, std::size_t od, std::size_t n_samples,
                    std::uint64_t rng_seed, std::size_t max_paths) {
  require_dual(network, dual.t, dual.gamma);
  const auto& pair = network.od_pairs().at(od);
  std::vector<double> costs;
  const bool complete = for_each_simple_path(network, pair.origin, pair.destination, network.vertex_count(),
                                             [&](std::span<const EdgeId> path) {
                                               if (costs.size() >= max_paths) return false;
                                               double g = 0.0;
                                               for (EdgeId e : path) g += dual.t[e];
                                               costs.push_back(g);
                                               return true;
                                             });
  if (!complete) throw SolverError("path enumeration overflow: more than " + std::to_string(max_paths) + " paths");
  if (dual.gamma == 0.0) return -*std::min_element(costs.begin(), costs.end());

  constexpr double kEulerGamma = 0.57721566490153286061;
  std::mt19937_64 rng(rng_seed);
  std::extreme_value_distribution<double> gumbel(0.0, 1.0);
  double mean = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    double best = kNoPath;
    for (double g : costs) best = std::max(best, -g + dual.gamma * (gumbel(rng) - kEulerGamma));
    mean += (best - mean) / static_cast<double>(s + 1);
  }
  return mean;
}

// ---------------------------------------------------------------------------

CharacteristicFunction::CharacteristicFunction(const Network& network, SmoothingOptions options)
    : network_(network), options_(options) {
  horizon_ = options_.horizon > 0 ? options_.horizon : std::max<std::size_t>(1, network.vertex_count() - 1);
  od_sink_.assign(network.od_count(), 0);
  for (VertexId sink : network.sinks()) {
    SinkPlan plan{sink, {}, topological_order(network, sink)};
    for (std::size_t w = 0; w < network.od_count(); ++w) {
      if (network.od_pairs()[w].destination == sink) {
        plan.ods.push_back(w);
        od_sink_[w] = sinks_.size();
      }
    }
    sinks_.push_back(std::move(plan));
  }
}

bool CharacteristicFunction::all_ordered() const {
  return std::all_of(sinks_.begin(), sinks_.end(), [](const SinkPlan& p) { return p.order.valid; });
}

double CharacteristicFunction::evaluate(std::span<const double> t, double gamma, EdgeFlow* flow) const {
  require_dual(network_, t, gamma);
  const std::size_t m = network_.edge_count();
  std::vector<SinkResult> results(sinks_.size());
  std::vector<EdgeFlow> flows(flow ? sinks_.size() : 0, EdgeFlow(m, 0.0));

  auto work = [&](std::size_t s) { results[s] = evaluate_sink(sinks_[s], t, gamma, flow ? &flows[s] : nullptr); };
  const unsigned workers = std::min<unsigned>(std::max(1u, options_.threads), static_cast<unsigned>(sinks_.size()));
  if (workers <= 1) {
    for (std::size_t s = 0; s < sinks_.size(); ++s) work(s);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < sinks_.size(); s += workers) work(s);
      });
    }
  }

  double value = 0.0;
  for (const auto& r : results) value += r.value;
  if (flow) {
    flow->assign(m, 0.0);
    for (const auto& f : flows) {
      for (std::size_t e = 0; e < m; ++e) (*flow)[e] += f[e];
    }
  }
  return value;
}

std::vector<double> CharacteristicFunction::od_values(std::span<const double> t, double gamma) const {
  require_dual(network_, t, gamma);
  std::vector<double> values(network_.od_count(), 0.0);
  for (const auto& plan : sinks_) {
    const auto r = evaluate_sink(plan, t, gamma, nullptr);
    for (std::size_t i = 0; i < plan.ods.size(); ++i) values[plan.ods[i]] = r.od_values[i];
  }
  return values;
}

CharacteristicFunction::SinkResult CharacteristicFunction::evaluate_sink(const SinkPlan& plan,
                                                                         std::span<const double> t, double gamma,
                                                                         EdgeFlow* flow) const {
  if (gamma == 0.0) return evaluate_shortest(plan, t, flow);
  return plan.order.valid ? evaluate_ordered(plan, t, gamma, flow) : evaluate_layered(plan, t, gamma, flow);
}

CharacteristicFunction::SinkResult CharacteristicFunction::evaluate_ordered(const SinkPlan& plan,
                                                                            std::span<const double> t,
                                                                            double gamma, EdgeFlow* flow) const {
  const std::size_t n = network_.vertex_count();
  std::vector<double> potential(n, kNoPath);
  potential[plan.sink] = 0.0;
  std::vector<double> z;
  const auto& order = plan.order.order;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const VertexId v = *it;
    if (v == plan.sink) continue;
    z.clear();
    for (EdgeId e : network_.out_edges(v)) z.push_back(potential[network_.edge(e).head] - t[e]);
    potential[v] = soft_max(z, gamma);
  }

  SinkResult result;
  std::vector<double> mass(n, 0.0);
  for (std::size_t w : plan.ods) {
    const auto& od = network_.od_pairs()[w];
    const double value = potential[od.origin];
    if (value == kNoPath) throw SolverError("OD pair " + std::to_string(w) + " has no path");
    result.od_values.push_back(value);
    result.value += od.demand * value;
    mass[od.origin] += od.demand;
  }
  if (!flow) return result;

  std::vector<double> p;
  for (VertexId v : order) {
    if (v == plan.sink || mass[v] == 0.0) continue;
    const auto out = network_.out_edges(v);
    z.clear();
    for (EdgeId e : out) z.push_back(potential[network_.edge(e).head] - t[e]);
    gibbs_weights(z, gamma, p);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (p[i] == 0.0) continue;
      const double load = mass[v] * p[i];
      (*flow)[out[i]] += load;
      mass[network_.edge(out[i]).head] += load;
    }
  }
  return result;
}

std::vector<double> CharacteristicFunction::layered_potentials(const SinkPlan& plan, std::span<const double> t,
                                                               double gamma) const {
  // beta[l * n + v]: gamma psi over walks v -> sink using at most (H - l) further edges.
  const std::size_t n = network_.vertex_count();
  const std::size_t h = horizon_;
  std::vector<double> beta((h + 1) * n, kNoPath);
  beta[h * n + plan.sink] = 0.0;
  std::vector<double> z;
  for (std::size_t l = h; l-- > 0;) {
    for (VertexId v = 0; v < n; ++v) {
      z.clear();
      if (v == plan.sink) z.push_back(0.0);
      for (EdgeId e : network_.out_edges(v)) z.push_back(beta[(l + 1) * n + network_.edge(e).head] - t[e]);
      beta[l * n + v] = soft_max(z, gamma);
    }
  }
  return beta;
}

CharacteristicFunction::SinkResult CharacteristicFunction::evaluate_layered(const SinkPlan& plan,
                                                                            std::span<const double> t,
                                                                            double gamma, EdgeFlow* flow) const {
  const std::size_t n = network_.vertex_count();
  const std::size_t h = horizon_;
  const auto beta = layered_potentials(plan, t, gamma);

  SinkResult result;
  std::vector<double> mass((h + 1) * n, 0.0);
  for (std::size_t w : plan.ods) {
    const auto& od = network_.od_pairs()[w];
    const double value = beta[od.origin];
    if (value == kNoPath) throw SolverError("OD pair " + std::to_string(w) + " has no walk within the horizon");
    result.od_values.push_back(value);
    result.value += od.demand * value;
    mass[od.origin] += od.demand;
  }
  if (!flow) return result;

  for (std::size_t l = 0; l < h; ++l) {
    for (VertexId v = 0; v < n; ++v) {
      const double here = mass[l * n + v];
      if (here == 0.0) continue;
      const double base = beta[l * n + v];
      for (EdgeId e : network_.out_edges(v)) {
        const VertexId k = network_.edge(e).head;
        const double next = beta[(l + 1) * n + k];
        if (next == kNoPath) continue;
        const double load = here * std::exp((next - t[e] - base) / gamma);
        (*flow)[e] += load;
        mass[(l + 1) * n + k] += load;
      }
    }
  }
  return result;
}

std::vector<double> CharacteristicFunction::shortest_potentials(VertexId sink, std::span<const double> t) const {
  for (double x : t) {
    if (x < 0.0) throw InputError("shortest-path limit requires nonnegative edge times");
  }
  const std::size_t n = network_.vertex_count();
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Item = std::pair<double, VertexId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[sink] = 0.0;
  queue.emplace(0.0, sink);
  while (!queue.empty()) {
    const auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (EdgeId e : network_.in_edges(v)) {
      const VertexId u = network_.edge(e).tail;
      if (d + t[e] < dist[u]) {
        dist[u] = d + t[e];
        queue.emplace(dist[u], u);
      }
    }
  }
  std::vector<double> potential(n);
  for (VertexId v = 0; v < n; ++v) potential[v] = std::isinf(dist[v]) ? kNoPath : -dist[v];
  return potential;
}

namespace {

// Out-edge of v on a shortest path to the sink, lowest edge id on ties.
EdgeId tree_edge(const Network& network, const std::vector<double>& potential, std::span<const double> t,
                 VertexId v) {
  EdgeId best = network.edge_count();
  double best_value = kNoPath;
  for (EdgeId e : network.out_edges(v)) {
    const double value = potential[network.edge(e).head] - t[e];
    if (value > best_value) {
      best_value = value;
      best = e;
    }
  }
  return best;
}

}  // namespace

CharacteristicFunction::SinkResult CharacteristicFunction::evaluate_shortest(const SinkPlan& plan,
                                                                             std::span<const double> t,
                                                                             EdgeFlow* flow) const {
  const auto potential = shortest_potentials(plan.sink, t);
  SinkResult result;
  for (std::size_t w : plan.ods) {
    const auto& od = network_.od_pairs()[w];
    result.od_values.push_back(potential[od.origin]);
    result.value += od.demand * potential[od.origin];
    if (!flow) continue;
    VertexId v = od.origin;
    for (std::size_t steps = 0; v != plan.sink; ++steps) {
      if (steps > network_.vertex_count()) throw SolverError("shortest-path tree walk did not terminate");
      const EdgeId e = tree_edge(network_, potential, t, v);
      (*flow)[e] += od.demand;
      v = network_.edge(e).head;
    }
  }
  return result;
}

std::vector<std::size_t> CharacteristicFunction::max_path_edges() const {
  std::vector<std::size_t> result(network_.od_count(), horizon_);
  const std::size_t n = network_.vertex_count();
  for (const auto& plan : sinks_) {
    if (!plan.order.valid) continue;
    // Longest path (in edges) to the sink over the reaching DAG.
    std::vector<long> longest(n, -1);
    longest[plan.sink] = 0;
    for (auto it = plan.order.order.rbegin(); it != plan.order.order.rend(); ++it) {
      const VertexId v = *it;
      if (v == plan.sink) continue;
      for (EdgeId e : network_.out_edges(v)) {
        const long next = longest[network_.edge(e).head];
        if (next >= 0) longest[v] = std::max(longest[v], next + 1);
      }
    }
    for (std::size_t w : plan.ods) result[w] = static_cast<std::size_t>(longest[network_.od_pairs()[w].origin]);
  }
  return result;
}

double CharacteristicFunction::lipschitz_bound(double gamma) const {
  const auto edges = max_path_edges();
  double sum = 0.0;
  for (std::size_t w = 0; w < network_.od_count(); ++w) {
    // A walk of H edges may repeat edges: its squared 2-norm is at most H^2.
    const double h = static_cast<double>(edges[w]);
    const double sq_norm = plan_for_od(w).order.valid ? h : h * h;
    sum += network_.od_pairs()[w].demand * sq_norm;
  }
  return sum / gamma;
}

// ---------------------------------------------------------------------------

CharacteristicFunction::Sampler::Sampler(const CharacteristicFunction& cf, std::uint64_t seed) : cf_(cf), rng_(seed) {
  std::vector<double> weights;
  for (const auto& od : cf.network_.od_pairs()) weights.push_back(od.demand);
  od_choice_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
}

Path CharacteristicFunction::Sampler::sample_path(std::span<const double> t, double gamma, std::size_t od) {
  const auto& network = cf_.network_;
  require_dual(network, t, gamma);
  const auto& pair = network.od_pairs().at(od);
  const auto& plan = cf_.plan_for_od(od);
  const std::size_t n = network.vertex_count();
  const std::size_t step_limit = network.edge_count() * n + 1;
  Path path;
  std::vector<double> z, p;

  if (gamma == 0.0) {
    const auto potential = cf_.shortest_potentials(plan.sink, t);
    for (VertexId v = pair.origin; v != plan.sink;) {
      if (path.size() > step_limit) throw SolverError("sampled walk exceeded m*|V| steps");
      const EdgeId e = tree_edge(network, potential, t, v);
      path.push_back(e);
      v = network.edge(e).head;
    }
    return path;
  }

  if (plan.order.valid) {
    std::vector<double> potential(n, kNoPath);
    potential[plan.sink] = 0.0;
    const auto& order = plan.order.order;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      if (*it == plan.sink) continue;
      z.clear();
      for (EdgeId e : network.out_edges(*it)) z.push_back(potential[network.edge(e).head] - t[e]);
      potential[*it] = soft_max(z, gamma);
    }
    for (VertexId v = pair.origin; v != plan.sink;) {
      if (path.size() > step_limit) throw SolverError("sampled walk exceeded m*|V| steps");
      const auto out = network.out_edges(v);
      z.clear();
      for (EdgeId e : out) z.push_back(potential[network.edge(e).head] - t[e]);
      gibbs_weights(z, gamma, p);
      const EdgeId e = out[draw(p, rng_)];
      path.push_back(e);
      v = network.edge(e).head;
    }
    return path;
  }

  // Time-expanded sampling: at (v, l) either stop (v is the sink) or take an edge.
  const auto beta = cf_.layered_potentials(plan, t, gamma);
  VertexId v = pair.origin;
  for (std::size_t l = 0;; ++l) {
    if (path.size() > step_limit) throw SolverError("sampled walk exceeded m*|V| steps");
    const auto out = network.out_edges(v);
    z.clear();
    z.push_back(v == plan.sink ? 0.0 : kNoPath);
    for (EdgeId e : out) z.push_back(l < cf_.horizon_ ? beta[(l + 1) * n + network.edge(e).head] - t[e] : kNoPath);
    gibbs_weights(z, gamma, p);
    const std::size_t choice = draw(p, rng_);
    if (choice == 0) break;
    const EdgeId e = out[choice - 1];
    path.push_back(e);
    v = network.edge(e).head;
  }
  return path;
}

EdgeFlow CharacteristicFunction::Sampler::sample_gradient(std::span<const double> t, double gamma, Path* path_out) {
  const std::size_t od = od_choice_(rng_);
  auto path = sample_path(t, gamma, od);
  EdgeFlow flow(cf_.network_.edge_count(), 0.0);
  const double total = cf_.network_.total_demand();
  for (EdgeId e : path) flow[e] += total;
  if (path_out) *path_out = std::move(path);
  return flow;
}

}  // namespace eqk
