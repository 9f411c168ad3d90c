#include "eqk/path_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>

#include "eqk/error.hpp"
#include "eqk/fgm.hpp"
#include "eqk/io.hpp"
#include "eqk/log.hpp"
#include "eqk/scalar.hpp"

namespace eqk {

// ---------------------------------------------------------------------------
// PathSet

PathSet::PathSet(const Network& network, std::vector<std::vector<Path>> per_od, bool truncated)
    : edge_count_(network.edge_count()), truncated_(truncated) {
  if (per_od.size() != network.od_count()) throw InputError("path set needs one path list per OD pair");
  offsets_.push_back(0);
  for (std::size_t w = 0; w < per_od.size(); ++w) {
    const auto& od = network.od_pairs()[w];
    if (per_od[w].empty()) throw InputError("OD pair " + std::to_string(w) + " has no paths");
    std::set<Path> seen;
    for (auto& path : per_od[w]) {
      if (path.empty()) throw InputError("empty path for OD pair " + std::to_string(w));
      VertexId at = od.origin;
      for (EdgeId e : path) {
        if (e >= network.edge_count()) throw InputError("path uses unknown edge " + std::to_string(e));
        if (network.edge(e).tail != at) throw InputError("path for OD pair " + std::to_string(w) + " is not connected");
        at = network.edge(e).head;
      }
      if (at != od.destination) {
        throw InputError("path for OD pair " + std::to_string(w) + " does not end at the destination");
      }
      if (!seen.insert(path).second) throw InputError("duplicate path for OD pair " + std::to_string(w));
      paths_.push_back(std::move(path));
    }
    offsets_.push_back(paths_.size());
    demands_.push_back(od.demand);
  }
}

std::size_t PathSet::max_edges() const {
  std::size_t h = 0;
  for (const auto& p : paths_) h = std::max(h, p.size());
  return h;
}

double PathSet::mean_edges() const {
  if (paths_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : paths_) s += static_cast<double>(p.size());
  return s / static_cast<double>(paths_.size());
}

EdgeFlow PathSet::edge_flows(std::span<const double> x) const {
  EdgeFlow f(edge_count_, 0.0);
  for (std::size_t p = 0; p < paths_.size(); ++p) {
    for (EdgeId e : paths_[p]) f[e] += x[p];
  }
  return f;
}

std::vector<double> PathSet::path_sums(std::span<const double> t) const {
  std::vector<double> out(paths_.size(), 0.0);
  for (std::size_t p = 0; p < paths_.size(); ++p) {
    for (EdgeId e : paths_[p]) out[p] += t[e];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Enumeration and counting

PathSlice enumerate_paths(const Network& network, std::size_t od, std::size_t max_paths, std::size_t max_edges,
                          bool allow_truncation) {
  if (max_paths == 0 || max_edges == 0) throw InputError("path enumeration limits must be positive");
  if (od >= network.od_count()) throw InputError("unknown OD pair " + std::to_string(od));
  const auto& pair = network.od_pairs()[od];
  PathSlice slice;
  for_each_simple_path(network, pair.origin, pair.destination, max_edges, [&](std::span<const EdgeId> path) {
    if (slice.paths.size() == max_paths) {
      slice.truncated = true;
      return false;
    }
    slice.paths.emplace_back(path.begin(), path.end());
    return true;
  });
  if (slice.truncated && !allow_truncation) {
    throw InputError("OD pair " + std::to_string(od) + " has more than " + std::to_string(max_paths) +
                     " paths; use a dual method instead");
  }
  return slice;
}

PathSet enumerate_all_paths(const Network& network, std::size_t max_paths_per_od, std::size_t max_edges,
                            bool allow_truncation) {
  if (max_edges == 0) max_edges = std::max<std::size_t>(1, network.vertex_count() - 1);
  std::vector<std::vector<Path>> per_od;
  bool truncated = false;
  for (std::size_t w = 0; w < network.od_count(); ++w) {
    auto slice = enumerate_paths(network, w, max_paths_per_od, max_edges, allow_truncation);
    truncated = truncated || slice.truncated;
    if (slice.paths.empty()) {
      throw InputError("OD pair " + std::to_string(w) + " has no path within " + std::to_string(max_edges) +
                       " edges");
    }
    per_od.push_back(std::move(slice.paths));
  }
  return PathSet(network, std::move(per_od), truncated);
}

std::vector<double> count_paths(const Network& network, std::size_t limit) {
  std::vector<double> counts(network.od_count(), 0.0);
  for (VertexId sink : network.sinks()) {
    const auto order = topological_order(network, sink);
    std::vector<double> to_sink;
    if (order.valid) {
      to_sink.assign(network.vertex_count(), 0.0);
      to_sink[sink] = 1.0;
      for (auto it = order.order.rbegin(); it != order.order.rend(); ++it) {
        if (*it == sink) continue;
        for (EdgeId e : network.out_edges(*it)) to_sink[*it] += to_sink[network.edge(e).head];
      }
    }
    for (std::size_t w = 0; w < network.od_count(); ++w) {
      const auto& od = network.od_pairs()[w];
      if (od.destination != sink) continue;
      if (order.valid) {
        counts[w] = to_sink[od.origin];
        continue;
      }
      std::size_t n = 0;
      const bool complete = for_each_simple_path(network, od.origin, od.destination, network.vertex_count(),
                                                 [&](std::span<const EdgeId>) { return ++n <= limit; });
      if (!complete) {
        throw InputError("OD pair " + std::to_string(w) + " has more than " + std::to_string(limit) +
                         " paths; supply a path-count bound instead");
      }
      counts[w] = static_cast<double>(n);
    }
  }
  return counts;
}

PathFlow uniform_path_flow(const PathSet& paths) {
  PathFlow x(paths.path_count());
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    const double share = paths.demand(w) / static_cast<double>(paths.size(w));
    std::fill(x.begin() + paths.begin(w), x.begin() + paths.end(w), share);
  }
  return x;
}

void check_path_flow(const PathSet& paths, std::span<const double> x, double tol) {
  if (x.size() != paths.path_count()) throw DomainError("path flow has the wrong size");
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    double sum = 0.0;
    for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) {
      if (!(x[p] >= -tol)) throw DomainError("negative path flow at path " + std::to_string(p));
      sum += x[p];
    }
    if (std::abs(sum - paths.demand(w)) > tol * std::max(1.0, paths.demand(w))) {
      throw DomainError("path flows of OD pair " + std::to_string(w) + " sum to " + format_double(sum) +
                        " instead of " + format_double(paths.demand(w)));
    }
  }
}

namespace {

double entropy(const PathSet& paths, std::span<const double> x) {
  double sum = 0.0;
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) {
      if (x[p] > 0.0) sum += x[p] * std::log(x[p] / paths.demand(w));
    }
  }
  return sum;
}

double sigma_sum(const Network& network, std::span<const double> f) {
  double sum = 0.0;
  for (EdgeId e = 0; e < network.edge_count(); ++e) sum += edge_cost_integral(network.edge(e).cost, std::max(0.0, f[e]));
  return sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

double primal_objective(const Network& network, const PathSet& paths, std::span<const double> x, double gamma) {
  check_path_flow(paths, x);
  const auto f = paths.edge_flows(x);
  return sigma_sum(network, f) + gamma * entropy(paths, x);
}

PathFlow entropy_prox_step(const PathSet& paths, std::span<const double> x, std::span<const double> grad, double step,
                           double gamma) {
  PathFlow out(x.size(), 0.0);
  std::vector<double> logits;
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    const double d = paths.demand(w);
    const double denom = d + step * gamma;
    logits.clear();
    for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) {
      logits.push_back(x[p] > 0.0 ? (d * std::log(x[p]) - step * grad[p]) / denom : kNoPath);
    }
    const double norm = log_sum_exp(logits);
    for (std::size_t i = 0; i < logits.size(); ++i) out[paths.begin(w) + i] = d * std::exp(logits[i] - norm);
  }
  return out;
}

double prox_exponent(std::size_t path_count) {
  if (path_count < 2) throw InputError("the l_a prox function needs at least two paths");
  const double l = 2.0 * std::log(static_cast<double>(path_count));
  return std::min(2.0, l / (l - 1.0));
}

// ---------------------------------------------------------------------------
// Path-based fast gradient

namespace {

// sum_w d_w / (2 (a_w - 1)) ||x_w - c_w||_{a_w}^2 around a movable center.
class LaProx {
 public:
  LaProx(const PathSet& paths, double gamma) : paths_(paths), gamma_(gamma) {
    for (std::size_t w = 0; w < paths.od_count(); ++w) {
      const std::size_t n = paths.size(w);
      const double a = n >= 2 ? prox_exponent(n) : 2.0;
      exponent_.push_back(a);
      coefficient_.push_back(paths.demand(w) / (a - 1.0));
      // Strong convexity modulus of the block in ||.||_1: d_w n^(2/a - 2).
      modulus_.push_back(n >= 2 ? paths.demand(w) * std::pow(static_cast<double>(n), 2.0 / a - 2.0) : 1.0);
    }
  }

  void set_center(std::vector<double> c) { center_ = std::move(c); }
  double modulus(std::size_t w) const { return modulus_[w]; }

  std::vector<double> step(std::span<const double> anchor, std::span<const double> g, double a) const {
    std::vector<double> out(anchor.begin(), anchor.end());
    for (std::size_t w = 0; w < paths_.od_count(); ++w) {
      if (paths_.size(w) < 2) {
        out[paths_.begin(w)] = paths_.demand(w);
        continue;
      }
      block_step(w, anchor, g, a, out);
    }
    return out;
  }

 private:
  static double signed_pow(double z, double q) { return z >= 0.0 ? std::pow(z, q) : -std::pow(-z, q); }

  double block_norm(std::size_t w, std::span<const double> x) const {
    const double a = exponent_[w];
    double s = 0.0;
    for (std::size_t p = paths_.begin(w); p < paths_.end(w); ++p) s += std::pow(std::abs(x[p] - center_[p]), a);
    return std::pow(s, 1.0 / a);
  }

  // Minimizes a (<g, x> + gamma sum x ln(x / d)) + d2(x) - <grad d2(anchor), x> over the simplex of OD w.
  void block_step(std::size_t w, std::span<const double> anchor, std::span<const double> g, double a_step,
                  std::vector<double>& out) const {
    const double a = exponent_[w];
    const double c = coefficient_[w];
    const double d = paths_.demand(w);
    const std::size_t b = paths_.begin(w), n = paths_.size(w);

    std::vector<double> theta(n, 0.0);
    const double anchor_norm = block_norm(w, anchor);
    if (anchor_norm > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        theta[i] = c * std::pow(anchor_norm, 2.0 - a) * signed_pow(anchor[b + i] - center_[b + i], a - 1.0);
      }
    }
    const double entropy_weight = a_step * gamma_;
    std::vector<double> x(n);

    // Coordinate i for coupling k = c s^(2-a) and multiplier nu, in y = ln x.
    auto coordinate = [&](std::size_t i, double k, double nu, double* dx_dnu) {
      const double base = a_step * g[b + i] - theta[i] + nu + entropy_weight * (1.0 - std::log(d));
      const double x0 = center_[b + i];
      auto phi = [&](double y) {
        const double xv = std::exp(y);
        const double z = xv - x0;
        const double value = entropy_weight * y + k * signed_pow(z, a - 1.0) + base;
        const double deriv = entropy_weight + k * (a - 1.0) * std::pow(std::abs(z), a - 2.0) * xv;
        return std::pair{value, deriv};
      };
      double lo = std::log(d) - 1.0, hi = std::log(d) + 1.0;
      for (double width = 1.0; phi(lo).first > 0.0; width *= 2.0) lo -= width;
      for (double width = 1.0; phi(hi).first < 0.0; width *= 2.0) hi += width;
      const auto root = solve_monotone(phi, lo, hi, [&](double y) { return std::max({1.0, std::abs(base), std::abs(entropy_weight * y)}); },
                                       1e-14);
      const double xv = std::exp(root.x);
      if (dx_dnu) {
        const double z = xv - x0;
        const double deriv = entropy_weight + k * (a - 1.0) * std::pow(std::abs(z), a - 2.0) * xv;
        *dx_dnu = std::isfinite(deriv) && deriv > 0.0 ? -xv / deriv : 0.0;
      }
      return xv;
    };

    auto fill_for_coupling = [&](double k) {
      // Sum of x decreases in nu; find nu with sum = d.
      auto excess = [&](double nu) {
        double sum = 0.0, deriv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double dx = 0.0;
          x[i] = coordinate(i, k, nu, &dx);
          sum += x[i];
          deriv += dx;
        }
        // Negated so that the function is nondecreasing in nu.
        return std::pair{d - sum, -deriv};
      };
      double lo = -1.0, hi = 1.0;
      for (double width = 1.0; excess(lo).first > 0.0; width *= 2.0) lo -= width;
      for (double width = 1.0; excess(hi).first < 0.0; width *= 2.0) hi += width;
      const auto root = solve_monotone(excess, lo, hi, [&](double) { return d; }, 1e-14);
      excess(root.x);
    };

    // The coupling depends on s = ||x - center||_a; s -> ||x(s) - center||_a - s is decreasing.
    auto mismatch = [&](double s) {
      fill_for_coupling(c * std::pow(s, 2.0 - a));
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm += std::pow(std::abs(x[i] - center_[b + i]), a);
      return std::pair{s - std::pow(norm, 1.0 / a), std::numeric_limits<double>::quiet_NaN()};
    };
    const auto root = solve_monotone(mismatch, 0.0, 2.0 * d, [&](double) { return d; }, 1e-13);
    mismatch(root.x);
    double sum = 0.0;
    for (double v : x) sum += v;
    for (std::size_t i = 0; i < n; ++i) out[b + i] = x[i] * d / sum;
  }

  const PathSet& paths_;
  double gamma_;
  std::vector<double> exponent_, coefficient_, modulus_, center_;
};

class PathProblem {
 public:
  using Point = std::vector<double>;

  PathProblem(const Network& network, const PathSet& paths, double gamma, bool strongly_convex)
      : network_(network), paths_(paths), gamma_(gamma), la_(paths, gamma), use_la_(strongly_convex) {}

  double evaluate(const Point& x, Point* grad) const {
    const auto f = paths_.edge_flows(x);
    if (grad) {
      std::vector<double> t(f.size());
      for (EdgeId e = 0; e < f.size(); ++e) t[e] = edge_cost(network_.edge(e).cost, std::max(0.0, f[e]));
      *grad = paths_.path_sums(t);
    }
    return sigma_sum(network_, f);
  }

  Point prox(const Point& anchor, const Point& g, double a) const {
    return use_la_ ? la_.step(anchor, g, a) : entropy_prox_step(paths_, anchor, g, a, gamma_);
  }

  Point blend(double wa, const Point& a, double wb, const Point& b) const {
    Point x(a.size());
    for (std::size_t p = 0; p < a.size(); ++p) x[p] = std::max(0.0, wa * a[p] + wb * b[p]);
    return x;
  }

  double inner(const Point& g, const Point& x, const Point& y) const {
    double s = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) s += g[p] * (x[p] - y[p]);
    return s;
  }

  double dist_sq(const Point& x, const Point& y) const {
    double s = 0.0;
    for (std::size_t w = 0; w < paths_.od_count(); ++w) {
      double l1 = 0.0;
      for (std::size_t p = paths_.begin(w); p < paths_.end(w); ++p) l1 += std::abs(x[p] - y[p]);
      s += (use_la_ ? la_.modulus(w) : 1.0) * l1 * l1;
    }
    return s;
  }

  void set_center(const Point& c) { la_.set_center(c); }

 private:
  const Network& network_;
  const PathSet& paths_;
  double gamma_;
  LaProx la_;
  bool use_la_;
};

// gamma psi(t / gamma) over the path set plus sum sigma*(t).
double path_dual_value(const Network& network, const PathSet& paths, std::span<const double> t, double gamma) {
  const auto cost = paths.path_sums(t);
  double value = 0.0;
  std::vector<double> z;
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    z.clear();
    for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) z.push_back(-cost[p]);
    value += paths.demand(w) * soft_max(z, gamma);
  }
  for (EdgeId e = 0; e < network.edge_count(); ++e) value += conjugate_cost(network.edge(e).cost, t[e]);
  return value;
}

// Path flows of the Gibbs distribution for edge times t.
PathFlow gibbs_path_flow(const PathSet& paths, std::span<const double> t, double gamma) {
  const auto cost = paths.path_sums(t);
  PathFlow x(paths.path_count());
  std::vector<double> z;
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    z.clear();
    for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) z.push_back(-cost[p] / gamma);
    const double norm = log_sum_exp(z);
    for (std::size_t i = 0; i < z.size(); ++i) x[paths.begin(w) + i] = paths.demand(w) * std::exp(z[i] - norm);
  }
  return x;
}

// Minimizes the primal objective on the segment from x to the Gibbs split z at t = tau(Theta x).
// z solves the entropy-composite linearization, so z - x is a descent direction.
PathFlow gibbs_line_search(const Network& network, const PathSet& paths, std::span<const double> x,
                           std::span<const double> t, double gamma) {
  const auto z = gibbs_path_flow(paths, t, gamma);
  std::vector<double> dir(x.size());
  for (std::size_t p = 0; p < x.size(); ++p) dir[p] = z[p] - x[p];
  auto point = [&](double theta) {
    PathFlow y(x.size());
    for (std::size_t p = 0; p < x.size(); ++p) y[p] = std::max(0.0, x[p] + theta * dir[p]);
    return y;
  };
  // Directional derivative, nondecreasing in theta.
  auto slope = [&](double theta) {
    const auto y = point(theta);
    const auto f = paths.edge_flows(y);
    std::vector<double> tau(f.size());
    for (EdgeId e = 0; e < f.size(); ++e) tau[e] = edge_cost(network.edge(e).cost, std::max(0.0, f[e]));
    const auto cost = paths.path_sums(tau);
    double s = 0.0;
    for (std::size_t w = 0; w < paths.od_count(); ++w) {
      for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) {
        if (dir[p] == 0.0) continue;
        s += dir[p] * (cost[p] + gamma * (std::log(y[p] / paths.demand(w)) + 1.0));
      }
    }
    return std::pair{s, std::numeric_limits<double>::quiet_NaN()};
  };
  double scale = 0.0;
  for (double v : dir) scale += std::abs(v);
  if (scale == 0.0) return point(0.0);
  const auto root = solve_monotone(slope, 0.0, 1.0, [&](double) { return 1e-3 * scale; }, 1e-13);
  return point(root.x);
}

}  // namespace

PathSolution solve_path_fgm(const Network& network, const PathSet& paths, const PathSolverConfig& config) {
  if (paths.truncated()) throw InputError("path-fgm needs a complete path set; enumeration was truncated");
  for (const auto& e : network.edges()) {
    if (e.cost.model == CostModel::kStableDynamics) {
      throw InputError("path-fgm handles BPR costs only; use dual-fgm for stable dynamics");
    }
  }
  if (!(config.gamma >= 0.0) || !std::isfinite(config.gamma)) throw InputError("gamma must be nonnegative");
  if (!(config.epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (config.strongly_convex && !(config.gamma > 0.0)) {
    throw InputError("the strongly convex variant needs gamma > 0");
  }

  double max_demand = 0.0, max_log_paths = 0.0, demand_sum = 0.0;
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    max_demand = std::max(max_demand, paths.demand(w));
    max_log_paths = std::max(max_log_paths, std::log(static_cast<double>(paths.size(w))));
    demand_sum += paths.demand(w);
  }
  const double strong_convexity = config.gamma / max_demand;

  PathSolution out;
  out.restart_multiplier = 2.0 * max_log_paths;
  Certificate& cert = out.certificate;
  cert.method = "path-fgm";
  cert.gamma = config.gamma;
  cert.epsilon = config.epsilon;
  log::info("path-fgm: {} paths, gamma={} (entropy dominates when gamma >> {})", paths.path_count(), config.gamma,
            config.epsilon / demand_sum);

  PathProblem problem(network, paths, config.gamma, config.strongly_convex);
  PathFlow start = uniform_path_flow(paths);
  problem.set_center(start);
  FgmOptions options{.adaptive = true, .lipschitz = config.initial_lipschitz_guess, .slack = 0.0};
  SimilarTriangles<PathProblem> method(problem, start, options);

  PathFlow best = start;
  double best_primal = primal_objective(network, paths, best, config.gamma);
  std::vector<double> best_t;
  double best_dual = 0.0;
  auto update_dual = [&] {
    const auto f = paths.edge_flows(best);
    best_t.resize(f.size());
    for (EdgeId e = 0; e < f.size(); ++e) best_t[e] = edge_cost(network.edge(e).cost, std::max(0.0, f[e]));
    best_dual = path_dual_value(network, paths, best_t, config.gamma);
  };
  update_dual();

  std::size_t stage_length = 0, stage_iterations = 0;
  for (std::size_t k = 0; k < config.max_iters; ++k) {
    const auto& step = method.step();
    cert.max_accepted_lipschitz = std::max(cert.max_accepted_lipschitz, step.lipschitz);
    const double primal = method.output_value() + config.gamma * entropy(paths, method.output());
    if (primal < best_primal) {
      best = method.output();
      best_primal = primal;
      update_dual();
      // Conditional-gradient step toward the Gibbs split at t = tau(Theta x), with exact line search.
      if (config.gamma > 0.0) {
        auto polished = gibbs_line_search(network, paths, best, best_t, config.gamma);
        const double value = primal_objective(network, paths, polished, config.gamma);
        if (value < best_primal) {
          best = std::move(polished);
          best_primal = value;
          update_dual();
        }
      }
    }
    cert.iterations = k + 1;
    cert.primal_value = best_primal;
    cert.dual_value = best_dual;
    cert.gap = best_primal + best_dual;
    cert.trace.push_back({k + 1, cert.gap, cert.dual_value, cert.primal_value});
    log::debug("path-fgm iter {} gap {} L {}", k + 1, cert.gap, step.lipschitz);
    if (cert.gap <= config.epsilon) break;

    if (config.strongly_convex) {
      if (stage_length == 0) {
        const double n0 = std::ceil(std::sqrt(8.0 * step.lipschitz * out.restart_multiplier / strong_convexity));
        stage_length = static_cast<std::size_t>(
            std::clamp(n0, static_cast<double>(config.restart_min), static_cast<double>(config.restart_max)));
        log::info("path-fgm: restart length {} (chi={}, strong convexity {})", stage_length, out.restart_multiplier,
                  strong_convexity);
      }
      if (++stage_iterations >= stage_length) {
        problem.set_center(best);
        method.reset(best);
        stage_iterations = 0;
        stage_length *= 2;
        ++out.restarts;
      }
    }
  }

  cert.gradient_evaluations = method.gradient_evaluations();
  cert.function_evaluations = method.function_evaluations();
  cert.entropy_term = config.gamma * entropy(paths, best);
  cert.converged = cert.gap <= config.epsilon;
  out.x = best;
  out.f = paths.edge_flows(best);
  log::info("path-fgm: {} iterations, {} restarts, gap {}", cert.iterations, out.restarts, cert.gap);
  return out;
}

// ---------------------------------------------------------------------------
// Penalty formulation

PenaltyStep penalty_f_step(const CostParams& p, double y, double lambda) {
  if (!(lambda > 0.0)) throw InputError("lambda must be positive");
  PenaltyStep r;
  const double at_zero = -y + lambda * p.t_free;
  r.scale = std::max({1.0, std::abs(y), lambda * p.t_free});
  if (at_zero >= 0.0) return r;
  if (p.model == CostModel::kStableDynamics) {
    r.flow = std::min(p.capacity, y - lambda * p.t_free);
    return r;
  }
  const auto phi = [&](double f) {
    return std::pair{f - y + lambda * edge_cost(p, f), 1.0 + lambda * edge_cost_derivative(p, f)};
  };
  const auto scale = [&](double f) { return std::max({r.scale, f, lambda * edge_cost(p, f)}); };
  const auto root = solve_monotone(phi, 0.0, -at_zero, scale);
  r.flow = root.x;
  r.residual = root.residual;
  r.scale = scale(root.x);
  r.iterations = root.iterations;
  return r;
}

namespace {

struct Joint {
  std::vector<double> x;
  std::vector<double> f;
};

class PenaltyProblem {
 public:
  using Point = Joint;

  PenaltyProblem(const Network& network, const PathSet& paths, double gamma, double lambda)
      : network_(network), paths_(paths), gamma_(gamma), lambda_(lambda) {}

  double evaluate(const Point& z, Point* grad) const {
    auto r = paths_.edge_flows(z.x);
    for (EdgeId e = 0; e < r.size(); ++e) r[e] -= z.f[e];
    if (grad) {
      grad->x = paths_.path_sums(r);
      grad->f = r;
      for (auto& v : grad->f) v = -v;
    }
    return 0.5 * dot(r, r);
  }

  Point prox(const Point& anchor, const Point& g, double a) const {
    Point out;
    out.x = entropy_prox_step(paths_, anchor.x, g.x, 0.5 * a, lambda_ * gamma_);
    out.f.resize(anchor.f.size());
    for (EdgeId e = 0; e < anchor.f.size(); ++e) {
      out.f[e] = penalty_f_step(network_.edge(e).cost, anchor.f[e] - 0.5 * a * g.f[e], 0.5 * a * lambda_).flow;
    }
    return out;
  }

  Point blend(double wa, const Point& a, double wb, const Point& b) const {
    Point out{std::vector<double>(a.x.size()), std::vector<double>(a.f.size())};
    for (std::size_t p = 0; p < a.x.size(); ++p) out.x[p] = std::max(0.0, wa * a.x[p] + wb * b.x[p]);
    for (EdgeId e = 0; e < a.f.size(); ++e) out.f[e] = clamp_flow(e, wa * a.f[e] + wb * b.f[e]);
    return out;
  }

  double inner(const Point& g, const Point& x, const Point& y) const {
    double s = 0.0;
    for (std::size_t p = 0; p < g.x.size(); ++p) s += g.x[p] * (x.x[p] - y.x[p]);
    for (std::size_t e = 0; e < g.f.size(); ++e) s += g.f[e] * (x.f[e] - y.f[e]);
    return s;
  }

  double dist_sq(const Point& x, const Point& y) const {
    double sx = 0.0;
    for (std::size_t w = 0; w < paths_.od_count(); ++w) {
      double l1 = 0.0;
      for (std::size_t p = paths_.begin(w); p < paths_.end(w); ++p) l1 += std::abs(x.x[p] - y.x[p]);
      sx += l1 * l1;
    }
    double sf = 0.0;
    for (std::size_t e = 0; e < x.f.size(); ++e) sf += (x.f[e] - y.f[e]) * (x.f[e] - y.f[e]);
    const double n = std::sqrt(sx) + std::sqrt(sf);
    return n * n;
  }

  double clamp_flow(EdgeId e, double f) const {
    const auto& p = network_.edge(e).cost;
    f = std::max(0.0, f);
    return p.model == CostModel::kStableDynamics ? std::min(f, p.capacity) : f;
  }

  // Full objective including the composite.
  double objective(const Point& z) const {
    return evaluate(z, nullptr) + lambda_ * (sigma_sum(network_, z.f) + gamma_ * entropy(paths_, z.x));
  }

  // Fenchel dual value at u (edge space); weak duality gives objective >= dual.
  double dual(std::vector<double> u) const {
    for (EdgeId e = 0; e < u.size(); ++e) {
      const auto& p = network_.edge(e).cost;
      if (p.model == CostModel::kBpr && p.rho == 0.0) u[e] = std::min(u[e], lambda_ * p.t_free);
    }
    double value = -0.5 * dot(u, u);
    const auto cost = paths_.path_sums(u);
    std::vector<double> z;
    for (std::size_t w = 0; w < paths_.od_count(); ++w) {
      z.clear();
      for (std::size_t p = paths_.begin(w); p < paths_.end(w); ++p) z.push_back(-cost[p]);
      value -= paths_.demand(w) * soft_max(z, lambda_ * gamma_);
    }
    for (EdgeId e = 0; e < u.size(); ++e) {
      const auto& p = network_.edge(e).cost;
      const double s = u[e] / lambda_;
      if (s <= p.t_free) continue;
      value -= lambda_ * (p.model == CostModel::kStableDynamics ? p.capacity * (s - p.t_free) : conjugate_cost(p, s));
    }
    return value;
  }

  std::vector<double> coupling(const Point& z) const {
    auto r = paths_.edge_flows(z.x);
    for (EdgeId e = 0; e < r.size(); ++e) r[e] -= z.f[e];
    return r;
  }

 private:
  const Network& network_;
  const PathSet& paths_;
  double gamma_, lambda_;
};

}  // namespace

PenaltySolution solve_penalty(const Network& network, const PathSet& paths, const PenaltyConfig& config) {
  if (!(config.lambda > 0.0)) throw InputError("lambda must be positive");
  if (!(config.gamma >= 0.0)) throw InputError("gamma must be nonnegative");
  if (!(config.epsilon > 0.0)) throw InputError("epsilon must be positive");
  if (paths.truncated()) throw InputError("path-penalty needs a complete path set; enumeration was truncated");
  const double objective_tol = config.objective_tolerance > 0.0 ? config.objective_tolerance : config.epsilon;

  std::vector<double> stages;
  if (config.continuation && config.lambda < 1.0 && config.continuation_factor > 1.0) {
    for (double l = 1.0; l > config.lambda * config.continuation_factor; l /= config.continuation_factor) {
      stages.push_back(l);
    }
  }
  stages.push_back(config.lambda);

  PenaltySolution out;
  Joint point{uniform_path_flow(paths), {}};
  point.f = paths.edge_flows(point.x);
  double lipschitz = config.initial_lipschitz_guess;

  for (std::size_t s = 0; s < stages.size(); ++s) {
    const double lambda = stages[s];
    const bool last = s + 1 == stages.size();
    PenaltyProblem problem(network, paths, config.gamma, lambda);
    for (EdgeId e = 0; e < point.f.size(); ++e) point.f[e] = problem.clamp_flow(e, point.f[e]);
    SimilarTriangles<PenaltyProblem> method(problem, point, {.adaptive = true, .lipschitz = lipschitz, .slack = 0.0});
    ++out.stages;
    log::info("path-penalty: stage {} lambda={}", out.stages, lambda);

    bool stage_done = false;
    while (!stage_done && out.iterations < config.max_iters) {
      method.step();
      ++out.iterations;
      const auto& z = method.output();
      const auto r = problem.coupling(z);
      out.objective = problem.objective(z);
      out.gap = out.objective - problem.dual(r);
      out.coupling_residual = std::sqrt(dot(r, r));
      if (out.iterations % 10 == 0) {
        out.trace.push_back({out.iterations, out.gap, out.objective - out.gap, out.objective});
      }
      log::debug("path-penalty iter {} gap {} residual {}", out.iterations, out.gap, out.coupling_residual);
      stage_done = out.gap <= lambda * objective_tol;
      if (last && stage_done && out.coupling_residual > config.epsilon) {
        // The dual is 1-strongly concave, so ||r - u*||^2 <= 2 gap. Keep going while the
        // residual target is still reachable at this lambda.
        if (out.coupling_residual - std::sqrt(2.0 * std::max(0.0, out.gap)) <= config.epsilon) {
          stage_done = false;
        } else {
          log::error("path-penalty: residual floor above epsilon at lambda={}; lower --lambda", lambda);
        }
      }
    }
    point = method.output();
    lipschitz = method.lipschitz();
    if (!stage_done) break;
    if (last) out.converged = out.coupling_residual <= config.epsilon;
  }
  out.trace.push_back({out.iterations, out.gap, out.objective - out.gap, out.objective});
  out.x = point.x;
  out.f = point.f;
  if (!out.converged) {
    log::error("path-penalty: stopped after {} iterations with residual {} and gap {}", out.iterations,
               out.coupling_residual, out.gap);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export

void write_path_set(std::ostream& out, const PathSet& paths) {
  out << "od_index,path_index,edge_list\n";
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) {
      out << w << ',' << p - paths.begin(w) << ',';
      const auto& path = paths.path(p);
      for (std::size_t i = 0; i < path.size(); ++i) out << (i ? ";" : "") << path[i];
      out << '\n';
    }
  }
}

void write_path_flows(std::ostream& out, const PathSet& paths, std::span<const double> x) {
  out << "od_index,path_index,flow\n";
  for (std::size_t w = 0; w < paths.od_count(); ++w) {
    for (std::size_t p = paths.begin(w); p < paths.end(w); ++p) {
      out << w << ',' << p - paths.begin(w) << ',' << format_double(x[p]) << '\n';
    }
  }
}

}  // namespace eqk
