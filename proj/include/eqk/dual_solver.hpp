#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "eqk/network.hpp"
#include "eqk/smoothing.hpp"

namespace eqk {

enum class DualMethod { kFgm, kUniversal, kSmd };

std::string_view to_string(DualMethod method);

struct SolverConfig {
  DualMethod method = DualMethod::kUniversal;
  double gamma = 1.0;
  double epsilon = 1e-6;
  std::size_t max_iters = 100000;
  // Starting local Lipschitz estimate of the universal method.
  double initial_lipschitz_guess = 1.0;
  // Stochastic mirror descent.
  std::uint64_t seed = 1;
  double smd_radius = 0.0;  // 0: dual_radius_estimate
  std::size_t smd_check_every = 1000;
  // Certify with weighted averages (on) or the last iterate only (off).
  bool averaging = true;
  unsigned threads = 1;
  // Keep every gradient point and its weight (for independent re-evaluation in tests).
  bool record_history = false;
};

struct TracePoint {
  std::size_t iteration = 0;
  double gap = 0.0;
  double dual_value = 0.0;
  double primal_value = 0.0;
};

// Duality-gap certificate. primal_value bounds the entropy-regularized primal
// objective at the averaged flows from above without materializing path flows:
// it is sum_e sigma_e(f_e) plus entropy_term = (1/A) sum_i a_i gamma E(x^i), each
// gamma E(x^i) obtained as -gamma psi(t^i/gamma) - <f^i, t^i>. Stable-dynamics
// edges above capacity are priced at (t_e - t_free_e) per unit of excess.
struct Certificate {
  std::string method;
  double gamma = 0.0;
  double epsilon = 0.0;
  std::size_t iterations = 0;
  double primal_value = 0.0;
  double dual_value = 0.0;
  double gap = 0.0;
  double entropy_term = 0.0;
  double capacity_violation = 0.0;
  std::size_t gradient_evaluations = 0;
  std::size_t function_evaluations = 0;
  double max_accepted_lipschitz = 0.0;
  double lipschitz_bound = 0.0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

struct HistoryEntry {
  double weight = 0.0;
  std::vector<double> t;
};

struct Equilibrium {
  DualPoint t_star;
  EdgeFlow f_star;
  Certificate certificate;
  std::vector<HistoryEntry> history;
};

// gamma psi(t / gamma) + sum_e sigma*_e(t_e); requires t >= t_free.
double dual_objective(const Network& network, const DualPoint& dual);

// Per-edge result of the composite prox subproblem.
struct ScalarProx {
  double time = 0.0;
  double flow = 0.0;      // conjugate gradient at `time`
  double residual = 0.0;  // g + L (time - y) + flow, zero at an interior optimum
  double scale = 1.0;     // magnitude of the terms in the residual
  int iterations = 0;
};

// argmin over t >= t_free of g t + (L / 2)(t - y)^2 + sigma*(t).
ScalarProx composite_prox_scalar(const CostParams& params, double g, double y, double step_l);

// Componentwise composite prox; throws SolverError naming the edge on failure.
DualPoint composite_prox_step(const Network& network, const DualPoint& anchor, std::span<const double> grad,
                              double step_l);

Equilibrium solve_dual_fgm(const Network& network, SolverConfig config);
Equilibrium solve_dual_universal(const Network& network, SolverConfig config);
Equilibrium solve_dual_smd(const Network& network, SolverConfig config);
Equilibrium solve_dual(const Network& network, const SolverConfig& config);

// eps / (2 sum_w d_w ln |P_w|). +inf when every OD has a single path.
double gamma_for_accuracy(const Network& network, double epsilon, std::span<const double> path_counts);

// Primal bound sum_e sigma_e(f_e) (+ priced capacity excess) + entropy_term, as in Certificate.
double primal_bound(const Network& network, std::span<const double> flow, double entropy_term,
                    std::span<const double> t_ref);

// Max over stable-dynamics edges of (f_e - capacity_e)_+.
// Scale of the optimal dual displacement used by the SMD step and the CLI estimates:
// ||t_free * rho|| over BPR edges, t_free for stable-dynamics edges, ||t_free|| if that is zero.
double dual_radius_estimate(const Network& network);

double capacity_violation(const Network& network, std::span<const double> flow);

struct CertificateCheck {
  double primal_value;
  double dual_value;
  double gap;
};

// Recomputes primal and dual values of a returned equilibrium from scratch.
CertificateCheck recheck_certificate(const Network& network, const Equilibrium& eq);

}  // namespace eqk
