#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "eqk/dual_solver.hpp"
#include "eqk/error.hpp"
#include "eqk/instances.hpp"
#include "eqk/path_solver.hpp"
#include "eqk/smoothing.hpp"

namespace eqk::cli {

namespace {

using oracles::compare;

std::vector<std::string> acyclic_instances() { return {"parallel-2", "parallel-3", "chain", "triangle", "grid-3x3"}; }

DualPoint random_dual(const Network& net, double gamma, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 2.0);
  DualPoint dual{std::vector<double>(net.edge_count()), gamma};
  for (EdgeId e = 0; e < net.edge_count(); ++e) dual.t[e] = net.edge(e).cost.t_free * (1.0 + u(rng));
  return dual;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double max_abs(const std::vector<double>& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

void psi_check(std::vector<VerifyResult>& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (const auto& name : acyclic_instances()) {
    const auto net = instances::by_name(name);
    CharacteristicFunction cf(net);
    double worst = 0.0, worst_oracle = 0.0, worst_method = 0.0;
    for (int k = 0; k < 20; ++k) {
      const auto dual = random_dual(net, 0.5 + 0.25 * k, rng);
      const auto values = cf.od_values(dual.t, dual.gamma);
      for (std::size_t w = 0; w < net.od_count(); ++w) {
        const auto& od = net.od_pairs()[w];
        const double oracle = oracles::psi_by_enumeration(net, dual, w);
        const auto ordered = psi_sink_ordered(net, dual, topological_order(net, od.destination));
        const auto layered = psi_source_layered(net, dual, od.origin, net.vertex_count() - 1);
        for (double method : {values[w], ordered.values[od.origin], layered.b(net.vertex_count() - 1, od.destination)}) {
          const double rel = std::abs(method - oracle) / std::max(1.0, std::abs(oracle));
          if (rel >= worst) {
            worst = rel;
            worst_oracle = oracle;
            worst_method = method;
          }
        }
      }
    }
    out.push_back({"psi", name,
                   compare("gamma psi_w (worst of ordered/layered/evaluator)", "path enumeration", worst_oracle,
                           worst_method, 1e-10 * std::max(1.0, std::abs(worst_oracle)))});
  }
}

void gradient_check(std::vector<VerifyResult>& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed + 1);
  auto names = acyclic_instances();
  names.push_back("two-cycle");
  for (const auto& name : names) {
    const auto net = instances::by_name(name);
    CharacteristicFunction cf(net);
    double worst = 0.0;
    for (double gamma : {0.1, 1.0, 10.0}) {
      for (int k = 0; k < 5; ++k) {
        auto dual = random_dual(net, gamma, rng);
        EdgeFlow flow;
        cf.evaluate(dual.t, gamma, &flow);
        const double h = 1e-3 * gamma;
        std::vector<double> fd(net.edge_count());
        for (EdgeId e = 0; e < net.edge_count(); ++e) {
          auto tp = dual.t, tm = dual.t;
          tp[e] += h;
          tm[e] -= h;
          fd[e] = -(cf.evaluate(tp, gamma) - cf.evaluate(tm, gamma)) / (2.0 * h);
        }
        worst = std::max(worst, max_abs_diff(fd, flow) / std::max(1e-300, max_abs(flow)));
      }
    }
    out.push_back({"gradient-check", name,
                   compare("max |fd - flow| / ||flow||_inf", "central difference", 0.0, worst, 1e-5)});
  }
}

void sampler_check(std::vector<VerifyResult>& out, std::uint64_t seed) {
  std::mt19937_64 rng(seed + 2);
  const std::size_t draws = 20000;
  for (const std::string name : {"parallel-2", "triangle", "grid-3x3"}) {
    const auto net = instances::by_name(name);
    CharacteristicFunction cf(net);
    CharacteristicFunction::Sampler sampler(cf, seed);
    const auto dual = random_dual(net, 1.0, rng);
    EdgeFlow flow;
    cf.evaluate(dual.t, dual.gamma, &flow);
    std::vector<double> sum(net.edge_count(), 0.0), sq(net.edge_count(), 0.0);
    for (std::size_t i = 0; i < draws; ++i) {
      const auto g = sampler.sample_gradient(dual.t, dual.gamma);
      for (EdgeId e = 0; e < g.size(); ++e) {
        sum[e] += g[e];
        sq[e] += g[e] * g[e];
      }
    }
    double worst_z = 0.0;
    for (EdgeId e = 0; e < net.edge_count(); ++e) {
      const double n = static_cast<double>(draws);
      const double mean = sum[e] / n;
      const double var = std::max(0.0, (sq[e] - n * mean * mean) / (n - 1.0));
      const double se = std::sqrt(var / n);
      const double dev = std::abs(mean - flow[e]);
      const double z = se > 0.0 ? dev / se : (dev > 1e-12 * net.total_demand() ? INFINITY : 0.0);
      worst_z = std::max(worst_z, z);
    }
    out.push_back({"sampler", name, compare("max |mean - flow| / standard error", "flow_from_dual", 0.0, worst_z, 3.0)});
  }
}

void logit_check(std::vector<VerifyResult>& out) {
  SolverConfig config;
  config.method = DualMethod::kUniversal;
  config.gamma = 1.0;
  config.epsilon = 1e-10;
  struct Case {
    std::string name;
    Network net;
  };
  std::vector<Case> cases{{"parallel-2", instances::parallel2()},
                          {"parallel-2 constant", instances::parallel2(0.0, 1.0)},
                          {"parallel-3", instances::parallel3()}};
  for (const auto& c : cases) {
    const auto oracle = oracles::logit_fixed_point_parallel(c.net, config.gamma);
    const auto eq = solve_dual(c.net, config);
    out.push_back({"logit", c.name,
                   compare("max edge flow deviation", "logit fixed point", 0.0, max_abs_diff(oracle, eq.f_star), 1e-5)});
  }
  const double closed = 10.0 / (1.0 + std::exp(-1.0));
  const auto constant = oracles::logit_fixed_point_parallel(instances::parallel2(0.0, 1.0), 1.0);
  out.push_back({"logit", "parallel-2 constant", compare("f_1", "closed form", closed, constant[0], 1e-9)});
}

void wardrop_check(std::vector<VerifyResult>& out) {
  const auto net = instances::parallel2();
  const auto counts = count_paths(net);
  SolverConfig config;
  config.method = DualMethod::kUniversal;
  config.gamma = gamma_for_accuracy(net, 0.05, counts);
  config.epsilon = 1e-6;
  const auto eq = solve_dual(net, config);
  const auto oracle = oracles::wardrop_parallel(net);
  const double d = net.total_demand();
  out.push_back({"wardrop", "parallel-2",
                 compare("max edge flow deviation", "wardrop bisection", 0.0, max_abs_diff(oracle, eq.f_star), 0.02 * d)});
}

void primal_check(std::vector<VerifyResult>& out) {
  for (const std::string name : {"parallel-2", "triangle"}) {
    const auto net = instances::by_name(name);
    const auto paths = enumerate_all_paths(net);
    PathSolverConfig config;
    config.gamma = 1.0;
    config.epsilon = 1e-9;
    const auto sol = solve_path_fgm(net, paths, config);
    const auto x = oracles::primal_minimize_tiny(net, paths, config.gamma, 200000, 1e-2);
    out.push_back({"primal", name,
                   compare("primal objective", "projected gradient", primal_objective(net, paths, x, config.gamma),
                           primal_objective(net, paths, sol.x, config.gamma), 1e-6)});
  }
}

void cross_method_check(std::vector<VerifyResult>& out) {
  for (const std::string name : {"chain", "triangle", "grid-3x3"}) {
    const auto net = instances::by_name(name);
    SolverConfig dual_config;
    dual_config.method = DualMethod::kUniversal;
    dual_config.epsilon = 1e-9;
    const auto eq = solve_dual(net, dual_config);
    const auto paths = enumerate_all_paths(net);
    PathSolverConfig path_config;
    path_config.epsilon = 1e-9;
    const auto sol = solve_path_fgm(net, paths, path_config);
    out.push_back({"cross-method", name,
                   compare("max edge flow deviation dual vs path", "path-fgm", 0.0, max_abs_diff(eq.f_star, sol.f),
                           1e-4 * net.total_demand())});
  }
}

void certificate_check(std::vector<VerifyResult>& out) {
  for (const auto& name : instances::names()) {
    const auto net = instances::by_name(name);
    SolverConfig config;
    config.method = DualMethod::kUniversal;
    config.epsilon = 1e-7;
    const auto eq = solve_dual(net, config);
    const auto check = recheck_certificate(net, eq);
    const double scale = std::max(1.0, std::abs(check.primal_value));
    out.push_back({"certificate", name,
                   compare("recomputed gap", "independent evaluation", check.gap, eq.certificate.gap, 1e-10 * scale)});
    out.push_back({"certificate", name, compare("gap <= epsilon", "epsilon", 0.0, std::max(0.0, eq.certificate.gap),
                                                config.epsilon)});
  }
}

}  // namespace

std::vector<std::string> verify_checks() {
  return {"psi", "gradient-check", "sampler", "logit", "wardrop", "primal", "cross-method", "certificate"};
}

std::vector<VerifyResult> run_verify(const std::string& only, std::uint64_t seed) {
  const auto checks = verify_checks();
  if (!only.empty() && std::find(checks.begin(), checks.end(), only) == checks.end()) {
    throw InputError("unknown check '" + only + "'");
  }
  auto wanted = [&](const char* name) { return only.empty() || only == name; };
  std::vector<VerifyResult> out;
  if (wanted("psi")) psi_check(out, seed);
  if (wanted("gradient-check")) gradient_check(out, seed);
  if (wanted("sampler")) sampler_check(out, seed);
  if (wanted("logit")) logit_check(out);
  if (wanted("wardrop")) wardrop_check(out);
  if (wanted("primal")) primal_check(out);
  if (wanted("cross-method")) cross_method_check(out);
  if (wanted("certificate")) certificate_check(out);
  return out;
}

}  // namespace eqk::cli
