#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "eqk/dual_solver.hpp"
#include "eqk/network.hpp"
#include "eqk/smoothing.hpp"

namespace eqk {

// Explicit path sets P_w, grouped by OD pair, with the path -> edge incidence.
class PathSet {
 public:
  PathSet() = default;
  // `per_od[w]` lists the paths of OD pair w. Validates endpoints and duplicates.
  PathSet(const Network& network, std::vector<std::vector<Path>> per_od, bool truncated = false);

  std::size_t od_count() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t path_count() const { return paths_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  std::span<const Path> paths() const { return paths_; }
  const Path& path(std::size_t p) const { return paths_[p]; }
  // Paths of OD w occupy [begin(w), end(w)).
  std::size_t begin(std::size_t w) const { return offsets_[w]; }
  std::size_t end(std::size_t w) const { return offsets_[w + 1]; }
  std::size_t size(std::size_t w) const { return end(w) - begin(w); }
  double demand(std::size_t w) const { return demands_[w]; }
  bool truncated() const { return truncated_; }
  // Longest path in edges (H) and the average path length (s).
  std::size_t max_edges() const;
  double mean_edges() const;

  // f = Theta x.
  EdgeFlow edge_flows(std::span<const double> x) const;
  // Theta^T t: per-path sums of edge values.
  std::vector<double> path_sums(std::span<const double> t) const;

 private:
  std::vector<Path> paths_;
  std::vector<std::size_t> offsets_;
  std::vector<double> demands_;
  std::size_t edge_count_ = 0;
  bool truncated_ = false;
};

using PathFlow = std::vector<double>;

struct PathSlice {
  std::vector<Path> paths;
  bool truncated = false;
};

// Simple paths of one OD pair with at most `max_edges` edges, lexicographic in edge ids.
// More than `max_paths` paths throws InputError unless `allow_truncation`, which keeps
// the first `max_paths` and marks the slice truncated.
PathSlice enumerate_paths(const Network& network, std::size_t od, std::size_t max_paths, std::size_t max_edges,
                          bool allow_truncation = false);

// All OD pairs; max_edges == 0 means |V| - 1.
PathSet enumerate_all_paths(const Network& network, std::size_t max_paths_per_od = 100000,
                            std::size_t max_edges = 0, bool allow_truncation = false);

// |P_w| per OD pair. Acyclic sinks are counted by dynamic programming; otherwise the
// simple paths are enumerated, and more than `limit` throws InputError.
std::vector<double> count_paths(const Network& network, std::size_t limit = 100000);

// Uniform split of every demand over its paths.
PathFlow uniform_path_flow(const PathSet& paths);

// Throws DomainError unless x >= -tol and every OD sums to d_w within tol * max(1, d_w).
void check_path_flow(const PathSet& paths, std::span<const double> x, double tol = 1e-9);

// sum_e sigma_e((Theta x)_e) + gamma sum_w sum_p x_p ln(x_p / d_w), with 0 ln 0 = 0.
double primal_objective(const Network& network, const PathSet& paths, std::span<const double> x, double gamma);

// argmin_z step (<grad, z> + gamma sum z ln(z / d_w)) + sum_w d_w KL(z_w || x_w) over the
// product of simplexes. Closed form per OD, evaluated in log space.
PathFlow entropy_prox_step(const PathSet& paths, std::span<const double> x, std::span<const double> grad, double step,
                           double gamma);

// Exponent of the l_a prox function; clamped to 2 for two paths. Throws for fewer than 2.
double prox_exponent(std::size_t path_count);

struct PathSolverConfig {
  double gamma = 1.0;
  double epsilon = 1e-6;
  std::size_t max_iters = 100000;
  bool strongly_convex = false;
  double initial_lipschitz_guess = 1.0;
  std::size_t restart_min = 10;
  std::size_t restart_max = 1000;
};

struct PathSolution {
  PathFlow x;
  EdgeFlow f;
  Certificate certificate;
  std::size_t restarts = 0;
  double restart_multiplier = 0.0;  // chi, diagnostics only
};

// Composite fast gradient on the path formulation. The certificate pairs the best
// primal iterate x with t = tau(Theta x). Refuses stable-dynamics edges and truncated
// path sets.
PathSolution solve_path_fgm(const Network& network, const PathSet& paths, const PathSolverConfig& config);

struct PenaltyStep {
  double flow = 0.0;
  double residual = 0.0;  // f - y + lambda tau(f) at an interior optimum, else the KKT violation
  double scale = 1.0;
  int iterations = 0;
};

// argmin over feasible f >= 0 of (f - y)^2 / 2 + lambda sigma_e(f).
PenaltyStep penalty_f_step(const CostParams& params, double y, double lambda);

struct PenaltyConfig {
  double lambda = 1.0;
  double gamma = 1.0;
  // Required coupling residual ||Theta x - f||_2.
  double epsilon = 1e-4;
  // Stage stopping rule: penalty duality gap <= lambda * objective_tolerance. 0 means epsilon.
  double objective_tolerance = 0.0;
  std::size_t max_iters = 1000000;
  // Solve for lambda_0 = max(lambda, 1) first and shrink by `continuation_factor`
  // per stage, warm-starting each stage from the previous one.
  bool continuation = true;
  double continuation_factor = 10.0;
  double initial_lipschitz_guess = 1.0;
};

struct PenaltySolution {
  PathFlow x;
  EdgeFlow f;
  double coupling_residual = 0.0;
  double objective = 0.0;
  double gap = 0.0;
  std::size_t iterations = 0;
  std::size_t stages = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

// Composite fast gradient on (x, f) for
//   1/2 ||Theta x - f||^2 + lambda (sum_e sigma_e(f_e) + gamma sum x ln(x / d_w)).
PenaltySolution solve_penalty(const Network& network, const PathSet& paths, const PenaltyConfig& config);

// CSV `od_index,path_index,edge_list` with semicolon-separated edge ids.
void write_path_set(std::ostream& out, const PathSet& paths);
// CSV `od_index,path_index,flow`.
void write_path_flows(std::ostream& out, const PathSet& paths, std::span<const double> x);

}  // namespace eqk
