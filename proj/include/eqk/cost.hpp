#pragma once

#include <string_view>

namespace eqk {

enum class CostModel { kBpr, kStableDynamics };

std::string_view to_string(CostModel model);

// Per-edge latency parameters.
//
// BPR:            tau(f) = t_free * (1 + rho * (f / capacity)^(1 / mu_power))
// StableDynamics: tau(f) = t_free for 0 <= f < capacity, [t_free, inf) at capacity,
//                 flows above capacity are infeasible.
struct CostParams {
  CostModel model = CostModel::kBpr;
  double t_free = 1.0;
  double capacity = 1.0;
  double rho = 0.15;
  double mu_power = 0.25;

  static CostParams bpr(double t_free, double capacity, double rho, double mu_power) {
    return {CostModel::kBpr, t_free, capacity, rho, mu_power};
  }
  static CostParams stable_dynamics(double t_free, double capacity) {
    return {CostModel::kStableDynamics, t_free, capacity, 0.0, 1.0};
  }
};

// Throws InputError unless t_free > 0, capacity > 0 and (for BPR) rho >= 0, mu_power > 0.
void validate(const CostParams& params);

// tau_e(f). Throws DomainError for f < 0 or a stable-dynamics flow above capacity.
double edge_cost(const CostParams& params, double flow);

// d tau_e / df; zero for stable dynamics below capacity.
double edge_cost_derivative(const CostParams& params, double flow);

// sigma_e(f) = integral of tau_e over [0, f].
double edge_cost_integral(const CostParams& params, double flow);

// sigma*_e(t) = sup_{f >= 0} (t f - sigma_e(f)), defined for t >= t_free.
// Returns 0 on the boundary t == t_free. A BPR edge with rho == 0 has the
// single-point domain {t_free}; any larger t yields +inf.
double conjugate_cost(const CostParams& params, double time);

// The flow f solving tau_e(f) = t (derivative of sigma*_e). Returns 0 at t == t_free.
double conjugate_cost_gradient(const CostParams& params, double time);

}  // namespace eqk
