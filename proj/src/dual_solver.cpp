#include "eqk/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eqk/error.hpp"
#include "eqk/fgm.hpp"
#include "eqk/log.hpp"
#include "eqk/scalar.hpp"

namespace eqk {

std::string_view to_string(DualMethod method) {
  switch (method) {
    case DualMethod::kFgm: return "dual-fgm";
    case DualMethod::kUniversal: return "dual-universal";
    case DualMethod::kSmd: return "dual-smd";
  }
  return "unknown";
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double conjugate_sum(const Network& network, std::span<const double> t) {
  double sum = 0.0;
  for (EdgeId e = 0; e < network.edge_count(); ++e) sum += conjugate_cost(network.edge(e).cost, t[e]);
  return sum;
}

void require_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InputError("gamma must be positive for the fast gradient methods; use dual-smd for gamma = 0");
  }
}

void require_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("epsilon must be positive");
}

std::vector<double> free_flow_times(const Network& network) {
  std::vector<double> t(network.edge_count());
  for (EdgeId e = 0; e < network.edge_count(); ++e) t[e] = network.edge(e).cost.t_free;
  return t;
}

// Smooth part gamma psi(t / gamma), composite sum sigma*_e plus t >= t_free, Euclidean prox.
class DualProblem {
 public:
  using Point = std::vector<double>;

  DualProblem(const Network& network, const CharacteristicFunction& cf, double gamma)
      : network_(network), cf_(cf), gamma_(gamma), t_free_(free_flow_times(network)) {}

  double evaluate(const Point& t, Point* grad) const {
    if (!grad) return cf_.evaluate(t, gamma_);
    const double value = cf_.evaluate(t, gamma_, grad);
    for (auto& g : *grad) g = -g;
    return value;
  }

  Point prox(const Point& anchor, const Point& g, double a) const {
    Point t(anchor.size());
    for (EdgeId e = 0; e < anchor.size(); ++e) t[e] = prox_edge(e, g[e], anchor[e], 1.0 / a);
    return t;
  }

  Point blend(double wa, const Point& a, double wb, const Point& b) const {
    Point t(a.size());
    for (std::size_t e = 0; e < a.size(); ++e) t[e] = std::max(t_free_[e], wa * a[e] + wb * b[e]);
    return t;
  }

  double inner(const Point& g, const Point& x, const Point& y) const {
    double s = 0.0;
    for (std::size_t e = 0; e < g.size(); ++e) s += g[e] * (x[e] - y[e]);
    return s;
  }

  double dist_sq(const Point& x, const Point& y) const {
    double s = 0.0;
    for (std::size_t e = 0; e < x.size(); ++e) s += (x[e] - y[e]) * (x[e] - y[e]);
    return s;
  }

  double prox_edge(EdgeId e, double g, double y, double step_l) const {
    try {
      return composite_prox_scalar(network_.edge(e).cost, g, y, step_l).time;
    } catch (const SolverError& err) {
      throw SolverError("composite prox on edge " + std::to_string(e) + ": " + err.what());
    }
  }

 private:
  const Network& network_;
  const CharacteristicFunction& cf_;
  double gamma_;
  std::vector<double> t_free_;
};

// Running weighted sums behind the certificate.
struct Averager {
  std::vector<double> flow_sum;
  double entropy_sum = 0.0;
  double weight_sum = 0.0;

  explicit Averager(std::size_t m) : flow_sum(m, 0.0) {}

  // `value` = gamma psi(t/gamma), `flow` = -grad at t.
  void add(double weight, std::span<const double> t, double value, std::span<const double> flow) {
    for (std::size_t e = 0; e < flow.size(); ++e) flow_sum[e] += weight * flow[e];
    entropy_sum += weight * (-value - dot(flow, t));
    weight_sum += weight;
  }
  std::vector<double> mean_flow() const {
    std::vector<double> f(flow_sum.size());
    for (std::size_t e = 0; e < f.size(); ++e) f[e] = flow_sum[e] / weight_sum;
    return f;
  }
  double mean_entropy() const { return entropy_sum / weight_sum; }
};

bool certified(const Certificate& c) {
  return c.gap <= c.epsilon && c.capacity_violation <= c.epsilon;
}

Certificate make_certificate(const SolverConfig& config) {
  Certificate c;
  c.method = std::string(to_string(config.method));
  c.gamma = config.gamma;
  c.epsilon = config.epsilon;
  return c;
}

// Certificate values at dual point t with primal flows f and entropy term.
void fill_values(const Network& network, Certificate& c, std::span<const double> t, double psi_value,
                 std::span<const double> f, double entropy_term) {
  c.dual_value = psi_value + conjugate_sum(network, t);
  c.entropy_term = entropy_term;
  c.primal_value = primal_bound(network, f, entropy_term, t);
  c.gap = c.primal_value + c.dual_value;
  c.capacity_violation = capacity_violation(network, f);
}

Equilibrium run_fast_gradient(const Network& network, SolverConfig config, bool adaptive) {
  require_gamma(config.gamma);
  require_epsilon(config.epsilon);
  CharacteristicFunction cf(network, {.horizon = 0, .threads = config.threads});
  DualProblem problem(network, cf, config.gamma);

  FgmOptions options;
  options.adaptive = adaptive;
  options.lipschitz = adaptive ? config.initial_lipschitz_guess : cf.lipschitz_bound(config.gamma);
  options.slack = adaptive ? config.epsilon : 0.0;
  SimilarTriangles<DualProblem> method(problem, free_flow_times(network), options);

  Equilibrium eq;
  eq.certificate = make_certificate(config);
  eq.certificate.lipschitz_bound = cf.lipschitz_bound(config.gamma);
  Averager averager(network.edge_count());
  std::vector<double> flow;

  log::info("{}: gamma={} epsilon={} L={}", eq.certificate.method, config.gamma, config.epsilon, options.lipschitz);
  for (std::size_t k = 0; k < config.max_iters; ++k) {
    const auto& step = method.step();
    flow = method.gradient();
    for (auto& x : flow) x = -x;
    averager.add(step.weight, method.gradient_point(), method.gradient_point_value(), flow);
    if (config.record_history) eq.history.push_back({step.weight, method.gradient_point()});
    eq.certificate.max_accepted_lipschitz = std::max(eq.certificate.max_accepted_lipschitz, step.lipschitz);

    const auto& t = method.output();
    if (config.averaging) {
      fill_values(network, eq.certificate, t, method.output_value(), averager.mean_flow(), averager.mean_entropy());
    } else {
      std::vector<double> last_flow;
      const double value = cf.evaluate(t, config.gamma, &last_flow);
      fill_values(network, eq.certificate, t, value, last_flow, -value - dot(last_flow, t));
    }
    eq.certificate.iterations = k + 1;
    eq.certificate.trace.push_back(
        {k + 1, eq.certificate.gap, eq.certificate.dual_value, eq.certificate.primal_value});
    if (!std::isfinite(eq.certificate.dual_value)) throw SolverError("non-finite dual objective");
    log::debug("iter {} gap {} dual {} L {}", k + 1, eq.certificate.gap, eq.certificate.dual_value, step.lipschitz);
    if (certified(eq.certificate)) break;
  }

  eq.t_star = {method.output(), config.gamma};
  if (config.averaging) {
    eq.f_star = averager.mean_flow();
  } else {
    cf.evaluate(eq.t_star.t, config.gamma, &eq.f_star);
  }
  eq.certificate.gradient_evaluations = method.gradient_evaluations();
  eq.certificate.function_evaluations = method.function_evaluations();
  eq.certificate.converged = certified(eq.certificate);
  log::info("{}: {} iterations, gap {}", eq.certificate.method, eq.certificate.iterations, eq.certificate.gap);
  return eq;
}

}  // namespace

double dual_objective(const Network& network, const DualPoint& dual) {
  for (EdgeId e = 0; e < network.edge_count(); ++e) {
    if (!(dual.t.at(e) >= network.edge(e).cost.t_free)) {
      throw DomainError("dual point outside dom sigma* at edge " + std::to_string(e));
    }
  }
  return psi_total(network, dual) + conjugate_sum(network, dual.t);
}

ScalarProx composite_prox_scalar(const CostParams& p, double g, double y, double step_l) {
  if (!(step_l > 0.0)) throw InputError("prox step parameter must be positive");
  ScalarProx r;
  const double at_free = g + step_l * (p.t_free - y);
  r.scale = std::max({1.0, std::abs(g), step_l * std::abs(y), step_l * p.t_free});

  if (p.model == CostModel::kStableDynamics) {
    r.time = std::max(p.t_free, y - (g + p.capacity) / step_l);
    r.flow = r.time > p.t_free ? p.capacity : 0.0;
    r.residual = r.time > p.t_free ? g + step_l * (r.time - y) + p.capacity : std::min(0.0, at_free + p.capacity);
    return r;
  }
  if (p.rho == 0.0 || at_free >= 0.0) {
    r.time = p.t_free;
    r.flow = 0.0;
    r.residual = p.rho == 0.0 ? 0.0 : std::min(0.0, at_free);
    return r;
  }
  // Interior optimum: solve g + L (tau(f) - y) + f = 0 for the flow, then t = tau(f).
  const auto phi = [&](double f) {
    return std::pair{g + step_l * (edge_cost(p, f) - y) + f, step_l * edge_cost_derivative(p, f) + 1.0};
  };
  const auto scale = [&](double f) { return std::max({r.scale, step_l * edge_cost(p, f), f}); };
  const auto root = solve_monotone(phi, 0.0, -at_free, scale);
  r.flow = root.x;
  r.time = edge_cost(p, root.x);
  r.residual = root.residual;
  r.scale = scale(root.x);
  r.iterations = root.iterations;
  return r;
}

DualPoint composite_prox_step(const Network& network, const DualPoint& anchor, std::span<const double> grad,
                              double step_l) {
  DualPoint out{std::vector<double>(network.edge_count()), anchor.gamma};
  for (EdgeId e = 0; e < network.edge_count(); ++e) {
    try {
      out.t[e] = composite_prox_scalar(network.edge(e).cost, grad[e], anchor.t[e], step_l).time;
    } catch (const SolverError& err) {
      throw SolverError("composite prox on edge " + std::to_string(e) + ": " + err.what());
    }
  }
  return out;
}

double primal_bound(const Network& network, std::span<const double> flow, double entropy_term,
                    std::span<const double> t_ref) {
  double sum = entropy_term;
  for (EdgeId e = 0; e < network.edge_count(); ++e) {
    const auto& p = network.edge(e).cost;
    const double f = std::max(0.0, flow[e]);
    if (p.model == CostModel::kStableDynamics && f > p.capacity) {
      sum += p.t_free * f + (t_ref[e] - p.t_free) * (f - p.capacity);
    } else {
      sum += edge_cost_integral(p, f);
    }
  }
  return sum;
}

double dual_radius_estimate(const Network& network) {
  double sq = 0.0;
  for (const auto& e : network.edges()) {
    const double congestion = e.cost.model == CostModel::kBpr ? e.cost.t_free * e.cost.rho : e.cost.t_free;
    sq += congestion * congestion;
  }
  if (sq == 0.0) {
    for (const auto& e : network.edges()) sq += e.cost.t_free * e.cost.t_free;
  }
  return std::sqrt(sq);
}

double capacity_violation(const Network& network, std::span<const double> flow) {
  double worst = 0.0;
  for (EdgeId e = 0; e < network.edge_count(); ++e) {
    const auto& p = network.edge(e).cost;
    if (p.model == CostModel::kStableDynamics) worst = std::max(worst, flow[e] - p.capacity);
  }
  return worst;
}

Equilibrium solve_dual_fgm(const Network& network, SolverConfig config) {
  config.method = DualMethod::kFgm;
  return run_fast_gradient(network, config, false);
}

Equilibrium solve_dual_universal(const Network& network, SolverConfig config) {
  config.method = DualMethod::kUniversal;
  return run_fast_gradient(network, config, true);
}

Equilibrium solve_dual_smd(const Network& network, SolverConfig config) {
  config.method = DualMethod::kSmd;
  require_epsilon(config.epsilon);
  if (!(config.gamma >= 0.0) || !std::isfinite(config.gamma)) throw InputError("gamma must be nonnegative");
  CharacteristicFunction cf(network, {.horizon = 0, .threads = config.threads});
  CharacteristicFunction::Sampler sampler(cf, config.seed);
  const std::size_t m = network.edge_count();

  // Step c / sqrt(k + 1) with c = R / M, M^2 = H (sum_w d_w)^2.
  const auto edges = cf.max_path_edges();
  const double h = static_cast<double>(*std::max_element(edges.begin(), edges.end()));
  const double m2 = std::sqrt(h) * network.total_demand();
  const double radius = config.smd_radius > 0.0 ? config.smd_radius : dual_radius_estimate(network);
  const double c = radius / m2;

  Equilibrium eq;
  eq.certificate = make_certificate(config);
  std::vector<double> t = free_flow_times(network);
  std::vector<double> t_sum(m, 0.0);
  double weight_sum = 0.0;
  std::vector<double> point(m);

  auto certify = [&](std::size_t iterations) {
    if (config.averaging) {
      for (std::size_t e = 0; e < m; ++e) point[e] = std::max(network.edge(e).cost.t_free, t_sum[e] / weight_sum);
    } else {
      point = t;
    }
    std::vector<double> flow;
    const double value = cf.evaluate(point, config.gamma, &flow);
    fill_values(network, eq.certificate, point, value, flow, -value - dot(flow, point));
    eq.certificate.iterations = iterations;
    eq.certificate.trace.push_back({iterations, eq.certificate.gap, eq.certificate.dual_value,
                                    eq.certificate.primal_value});
    eq.f_star = std::move(flow);
    log::debug("smd iter {} gap {}", iterations, eq.certificate.gap);
  };

  log::info("dual-smd: gamma={} epsilon={} step constant={}", config.gamma, config.epsilon, c);
  const std::size_t check = std::max<std::size_t>(1, config.smd_check_every);
  for (std::size_t k = 0; k < config.max_iters; ++k) {
    auto g = sampler.sample_gradient(t, config.gamma);
    for (auto& x : g) x = -x;
    const double step = c / std::sqrt(static_cast<double>(k + 1));
    if (config.record_history) eq.history.push_back({step, t});
    for (EdgeId e = 0; e < m; ++e) {
      t[e] = composite_prox_scalar(network.edge(e).cost, g[e], t[e], 1.0 / step).time;
      t_sum[e] += step * t[e];
    }
    weight_sum += step;
    if ((k + 1) % check == 0 || k + 1 == config.max_iters) {
      certify(k + 1);
      if (certified(eq.certificate)) break;
    }
  }
  if (eq.certificate.iterations == 0) certify(0);
  eq.t_star = {point, config.gamma};
  eq.certificate.gradient_evaluations = eq.certificate.iterations;
  eq.certificate.converged = certified(eq.certificate);
  log::info("dual-smd: {} iterations, gap {}", eq.certificate.iterations, eq.certificate.gap);
  return eq;
}

Equilibrium solve_dual(const Network& network, const SolverConfig& config) {
  switch (config.method) {
    case DualMethod::kFgm: return solve_dual_fgm(network, config);
    case DualMethod::kUniversal: return solve_dual_universal(network, config);
    case DualMethod::kSmd: return solve_dual_smd(network, config);
  }
  throw InputError("unknown dual method");
}

double gamma_for_accuracy(const Network& network, double epsilon, std::span<const double> path_counts) {
  require_epsilon(epsilon);
  if (path_counts.size() != network.od_count()) throw InputError("need one path-count bound per OD pair");
  double weighted = 0.0;
  for (std::size_t w = 0; w < network.od_count(); ++w) {
    if (path_counts[w] < 1.0) throw InputError("path-count bound below 1 for OD pair " + std::to_string(w));
    weighted += network.od_pairs()[w].demand * std::log(path_counts[w]);
  }
  if (weighted == 0.0) return std::numeric_limits<double>::infinity();
  return epsilon / (2.0 * weighted);
}

CertificateCheck recheck_certificate(const Network& network, const Equilibrium& eq) {
  CertificateCheck check{};
  check.dual_value = dual_objective(network, eq.t_star);
  check.primal_value = primal_bound(network, eq.f_star, eq.certificate.entropy_term, eq.t_star.t);
  check.gap = check.primal_value + check.dual_value;
  return check;
}

}  // namespace eqk
