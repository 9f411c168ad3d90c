#include "eqk/cost.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "eqk/error.hpp"

namespace eqk {
namespace {

void require_nonnegative_flow(double flow) {
  if (!(flow >= 0.0)) throw DomainError("negative edge flow: " + std::to_string(flow));
}

void require_within_capacity(const CostParams& p, double flow) {
  if (p.model == CostModel::kStableDynamics && flow > p.capacity) {
    throw DomainError("stable-dynamics flow " + std::to_string(flow) + " exceeds capacity " +
                      std::to_string(p.capacity));
  }
}

void require_time_domain(const CostParams& p, double time) {
  if (!(time >= p.t_free)) {
    throw DomainError("time " + std::to_string(time) + " below free-flow time " +
                      std::to_string(p.t_free));
  }
}

}  // namespace

std::string_view to_string(CostModel model) {
  return model == CostModel::kBpr ? "bpr" : "sd";
}

void validate(const CostParams& p) {
  if (!(p.t_free > 0.0) || !std::isfinite(p.t_free)) throw InputError("nonpositive free-flow time");
  if (!(p.capacity > 0.0) || !std::isfinite(p.capacity)) throw InputError("nonpositive capacity");
  if (p.model == CostModel::kBpr) {
    if (!(p.rho >= 0.0) || !std::isfinite(p.rho)) throw InputError("negative rho");
    if (!(p.mu_power > 0.0) || !std::isfinite(p.mu_power)) throw InputError("nonpositive mu_power");
  }
}

double edge_cost(const CostParams& p, double flow) {
  require_nonnegative_flow(flow);
  require_within_capacity(p, flow);
  if (p.model == CostModel::kStableDynamics) return p.t_free;
  return p.t_free * (1.0 + p.rho * std::pow(flow / p.capacity, 1.0 / p.mu_power));
}

double edge_cost_derivative(const CostParams& p, double flow) {
  require_nonnegative_flow(flow);
  require_within_capacity(p, flow);
  if (p.model == CostModel::kStableDynamics) return 0.0;
  const double exponent = 1.0 / p.mu_power;
  if (flow == 0.0) return exponent < 1.0 ? std::numeric_limits<double>::infinity()
                                         : (exponent == 1.0 ? p.t_free * p.rho / p.capacity : 0.0);
  return p.t_free * p.rho * exponent / p.capacity * std::pow(flow / p.capacity, exponent - 1.0);
}

double edge_cost_integral(const CostParams& p, double flow) {
  require_nonnegative_flow(flow);
  require_within_capacity(p, flow);
  if (p.model == CostModel::kStableDynamics) return p.t_free * flow;
  const double mu = p.mu_power;
  return p.t_free * flow +
         p.t_free * p.rho * p.capacity * std::pow(flow / p.capacity, 1.0 + 1.0 / mu) * mu / (1.0 + mu);
}

double conjugate_cost(const CostParams& p, double time) {
  require_time_domain(p, time);
  const double excess = time - p.t_free;
  if (excess == 0.0) return 0.0;
  if (p.model == CostModel::kStableDynamics) return p.capacity * excess;
  if (p.rho == 0.0) return std::numeric_limits<double>::infinity();
  const double flow = p.capacity * std::pow(excess / (p.t_free * p.rho), p.mu_power);
  return flow * excess / (1.0 + p.mu_power);
}

double conjugate_cost_gradient(const CostParams& p, double time) {
  require_time_domain(p, time);
  const double excess = time - p.t_free;
  if (excess == 0.0) return 0.0;
  if (p.model == CostModel::kStableDynamics) return p.capacity;
  if (p.rho == 0.0) return std::numeric_limits<double>::infinity();
  return p.capacity * std::pow(excess / (p.t_free * p.rho), p.mu_power);
}

}  // namespace eqk
