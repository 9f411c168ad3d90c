#include "eqk/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eqk/cost.hpp"
#include "eqk/error.hpp"

namespace eqk::oracles {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Plain two-pass log-sum-exp, kept separate from the library version on purpose.
double lse(const std::vector<double>& v) {
  double top = -kInf;
  for (double x : v) top = std::max(top, x);
  if (top == -kInf) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - top);
  return top + std::log(s);
}

// Flow range of one link when the common travel time is T.
struct Range {
  double lo, hi;
};

Range link_flow(const CostParams& p, double T) {
  if (T < p.t_free) return {0.0, 0.0};
  if (p.model == CostModel::kStableDynamics) return T == p.t_free ? Range{0.0, p.capacity} : Range{p.capacity, p.capacity};
  if (p.rho == 0.0) return T == p.t_free ? Range{0.0, kInf} : Range{kInf, kInf};
  const double f = p.capacity * std::pow((T / p.t_free - 1.0) / p.rho, p.mu_power);
  return {f, f};
}

// Euclidean projection of v onto {x >= 0, sum x = total}, by sorting.
void project_simplex(std::vector<double>& v, double total) {
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, shift = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double candidate = (cumulative - total) / static_cast<double>(i + 1);
    if (u[i] - candidate > 0.0) shift = candidate;
  }
  for (double& x : v) x = std::max(0.0, x - shift);
}

}  // namespace

OracleReport compare(std::string quantity, std::string oracle, double oracle_value, double method_value,
                     double tolerance) {
  OracleReport r;
  r.quantity = std::move(quantity);
  r.oracle = std::move(oracle);
  r.oracle_value = oracle_value;
  r.method_value = method_value;
  r.abs_deviation = std::abs(oracle_value - method_value);
  if (oracle_value == method_value) r.abs_deviation = 0.0;  // equal infinities
  r.rel_deviation = r.abs_deviation / std::max(1.0, std::abs(oracle_value));
  r.tolerance = tolerance;
  r.pass = r.abs_deviation <= tolerance;
  return r;
}

double psi_by_enumeration(const Network& network, const DualPoint& dual, std::size_t od, std::size_t max_paths) {
  const auto& pair = network.od_pairs().at(od);
  std::vector<double> values;
  bool overflow = false;
  for_each_simple_path(network, pair.origin, pair.destination, network.vertex_count(),
                       [&](std::span<const EdgeId> path) {
                         if (values.size() == max_paths) {
                           overflow = true;
                           return false;
                         }
                         double cost = 0.0;
                         for (EdgeId e : path) cost += dual.t[e];
                         values.push_back(-cost);
                         return true;
                       });
  if (overflow) throw InputError("more than " + std::to_string(max_paths) + " paths to enumerate");
  if (dual.gamma == 0.0) {
    double best = -kInf;
    for (double v : values) best = std::max(best, v);
    return best;
  }
  for (double& v : values) v /= dual.gamma;
  return dual.gamma * lse(values);
}

void require_parallel(const Network& network) {
  if (network.od_count() != 1) throw InputError("parallel-link oracle needs exactly one OD pair");
  const auto& od = network.od_pairs()[0];
  for (const auto& e : network.edges()) {
    if (e.tail != od.origin || e.head != od.destination) {
      throw InputError("parallel-link oracle needs every edge to join origin and destination");
    }
  }
}

EdgeFlow logit_fixed_point_parallel(const Network& network, double gamma, double tol) {
  require_parallel(network);
  if (!(gamma > 0.0)) throw InputError("logit oracle needs gamma > 0");
  const double d = network.od_pairs()[0].demand;
  const std::size_t m = network.edge_count();

  auto gibbs = [&](const std::vector<double>& f, std::vector<double>& out) {
    std::vector<double> z(m);
    for (std::size_t e = 0; e < m; ++e) z[e] = -edge_cost(network.edge(e).cost, f[e]) / gamma;
    const double norm = lse(z);
    for (std::size_t e = 0; e < m; ++e) out[e] = d * std::exp(z[e] - norm);
  };

  double damping = 0.5;
  for (int attempt = 0; attempt <= 20; ++attempt, damping /= 2.0) {
    std::vector<double> f(m, d / static_cast<double>(m)), g(m);
    double first = kInf;
    const std::size_t budget = static_cast<std::size_t>(200.0 / damping) + 10000;
    for (std::size_t it = 0; it < budget; ++it) {
      gibbs(f, g);
      double residual = 0.0;
      for (std::size_t e = 0; e < m; ++e) residual = std::max(residual, std::abs(g[e] - f[e]));
      if (it == 0) first = residual;
      if (residual <= tol * std::max(1.0, d)) return g;
      if (!std::isfinite(residual) || residual > 10.0 * first + d) break;
      for (std::size_t e = 0; e < m; ++e) f[e] = (1.0 - damping) * f[e] + damping * g[e];
    }
  }
  throw SolverError("logit fixed point did not converge");
}

EdgeFlow wardrop_parallel(const Network& network, double tol) {
  require_parallel(network);
  const double d = network.od_pairs()[0].demand;
  const std::size_t m = network.edge_count();
  auto total = [&](double T, bool upper) {
    double s = 0.0;
    for (const auto& e : network.edges()) {
      const auto r = link_flow(e.cost, T);
      s += upper ? r.hi : r.lo;
    }
    return s;
  };
  // Common time T with lo_sum(T) <= d <= hi_sum(T).
  double T = kInf;
  for (const auto& e : network.edges()) {
    const double b = e.cost.t_free;
    if (total(b, false) <= d && d <= total(b, true)) T = std::min(T, b);
  }
  if (T == kInf) {
    double lo = kInf;
    for (const auto& e : network.edges()) lo = std::min(lo, e.cost.t_free);
    double hi = 2.0 * lo;
    for (int i = 0; total(hi, false) < d; ++i) {
      if (i > 200) throw InputError("demand exceeds the total capacity of the links");
      hi *= 2.0;
    }
    for (int i = 0; i < 400 && hi - lo > tol * hi; ++i) {
      const double mid = 0.5 * (lo + hi);
      (total(mid, false) < d ? lo : hi) = mid;
    }
    T = 0.5 * (lo + hi);
  }

  EdgeFlow f(m, 0.0);
  double assigned = 0.0;
  std::vector<std::size_t> flexible;
  for (std::size_t e = 0; e < m; ++e) {
    const auto r = link_flow(network.edge(e).cost, T);
    if (r.lo == r.hi) {
      f[e] = r.lo;
      assigned += r.lo;
    } else {
      f[e] = r.lo;
      assigned += r.lo;
      flexible.push_back(e);
    }
  }
  // Split what is left over the links whose time is exactly T, equally up to their limits.
  double rest = std::max(0.0, d - assigned);
  while (rest > 0.0 && !flexible.empty()) {
    const double share = rest / static_cast<double>(flexible.size());
    std::vector<std::size_t> still;
    for (std::size_t e : flexible) {
      const double room = link_flow(network.edge(e).cost, T).hi - f[e];
      const double add = std::min(room, share);
      f[e] += add;
      rest -= add;
      if (room > share) still.push_back(e);
    }
    if (still.size() == flexible.size()) break;
    flexible = std::move(still);
  }
  return f;
}

std::vector<double> primal_minimize_tiny(const Network& network, const PathSet& paths, double gamma,
                                         std::size_t iters, double step) {
  if (paths.path_count() > 50) throw InputError("primal oracle is limited to 50 paths");
  for (const auto& e : network.edges()) {
    if (e.cost.model == CostModel::kStableDynamics) throw InputError("primal oracle handles BPR costs only");
  }
  const std::size_t n = paths.path_count();
  std::vector<double> x(n);
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) x[p] = paths.demand(w) / static_cast<double>(paths.size(w));
  }
  std::vector<double> f(network.edge_count()), g(n), block;
  for (std::size_t it = 0; it < iters; ++it) {
    std::fill(f.begin(), f.end(), 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      for (EdgeId e : paths.path(p)) f[e] += x[p];
    }
    for (std::size_t w = 0; w < paths.od_count(); ++w) {
      const double d = paths.demand(w);
      block.clear();
      for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) {
        double cost = 0.0;
        for (EdgeId e : paths.path(p)) cost += edge_cost(network.edge(e).cost, f[e]);
        if (gamma > 0.0) cost += gamma * (std::log(std::max(x[p], 1e-12 * d) / d) + 1.0);
        block.push_back(x[p] - step * cost);
      }
      project_simplex(block, d);
      std::copy(block.begin(), block.end(), x.begin() + paths.begin(w));
    }
  }
  return x;
}

}  // namespace eqk::oracles
