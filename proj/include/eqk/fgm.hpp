#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>

namespace eqk {

struct FgmOptions {
  // Backtracking on the local Lipschitz estimate (universal method). When false,
  // `lipschitz` is a global bound and weights follow a_k = (k + 1) / (2L).
  bool adaptive = true;
  double lipschitz = 1.0;
  // Accuracy slack delta: a step is accepted when the upper quadratic model holds
  // up to delta * a / (2 A).
  double slack = 0.0;
};

struct FgmStep {
  std::size_t iteration = 0;
  double weight = 0.0;        // a_k
  double total_weight = 0.0;  // A_k
  double lipschitz = 0.0;     // accepted L
  std::size_t trials = 0;     // backtracking trials in this iteration
};

// Composite fast gradient method in similar-triangles form.
//
// Problem supplies:
//   using Point;
//   double evaluate(const Point& x, Point* grad);               smooth part F and its gradient
//   Point prox(const Point& anchor, const Point& g, double a);   argmin_z a(<g, z> + h(z)) + V(z, anchor)
//   Point blend(double wa, const Point& a, double wb, const Point& b);
//   double inner(const Point& g, const Point& x, const Point& y);   <g, x - y>
//   double dist_sq(const Point& x, const Point& y);                 ||x - y||^2 in the prox norm
//
// Every accepted iteration satisfies, for all z,
//   A_k (F + h)(x_k) <= sum_i a_i [F(y_i) + <grad F(y_i), z - y_i> + h(z)] + V(z, x_0) + slack terms,
// which is what the solvers' duality-gap certificates rely on.
template <class Problem>
class SimilarTriangles {
 public:
  using Point = typename Problem::Point;

  SimilarTriangles(Problem& problem, Point start, FgmOptions options)
      : problem_(problem), options_(options), lipschitz_(options.lipschitz) {
    reset(std::move(start));
  }

  void reset(Point start) {
    u_ = start;
    x_ = start;
    x_value_ = problem_.evaluate(x_, nullptr);
    ++function_evaluations_;
    total_weight_ = 0.0;
    k_ = 0;
  }

  const FgmStep& step() {
    FgmStep info;
    info.iteration = k_;
    double lipschitz = options_.adaptive ? lipschitz_ / 2.0 : lipschitz_;
    for (;;) {
      ++info.trials;
      double a;
      if (options_.adaptive) {
        a = (1.0 + std::sqrt(1.0 + 4.0 * lipschitz * total_weight_)) / (2.0 * lipschitz);
      } else {
        a = static_cast<double>(k_ + 1) / (2.0 * lipschitz);
      }
      const double total = total_weight_ + a;
      Point y = total_weight_ == 0.0 ? u_ : problem_.blend(total_weight_ / total, x_, a / total, u_);
      Point grad;
      const double y_value = problem_.evaluate(y, &grad);
      ++gradient_evaluations_;
      Point u_next = problem_.prox(u_, grad, a);
      Point x_next = problem_.blend(total_weight_ / total, x_, a / total, u_next);
      const double x_value = problem_.evaluate(x_next, nullptr);
      ++function_evaluations_;

      const double model = y_value + problem_.inner(grad, x_next, y) +
                           0.5 * lipschitz * problem_.dist_sq(x_next, y) + 0.5 * options_.slack * a / total;
      const bool accept = !options_.adaptive || x_value <= model || !std::isfinite(lipschitz * 2.0);
      if (accept) {
        u_ = std::move(u_next);
        x_ = std::move(x_next);
        x_value_ = x_value;
        y_ = std::move(y);
        y_value_ = y_value;
        grad_ = std::move(grad);
        total_weight_ = total;
        lipschitz_ = lipschitz;
        info.weight = a;
        info.total_weight = total;
        info.lipschitz = lipschitz;
        ++k_;
        last_ = info;
        return last_;
      }
      lipschitz *= 2.0;
    }
  }

  const Point& output() const { return x_; }
  double output_value() const { return x_value_; }
  const Point& gradient_point() const { return y_; }
  double gradient_point_value() const { return y_value_; }
  const Point& gradient() const { return grad_; }
  double total_weight() const { return total_weight_; }
  double lipschitz() const { return lipschitz_; }
  std::size_t iterations() const { return k_; }
  std::size_t gradient_evaluations() const { return gradient_evaluations_; }
  std::size_t function_evaluations() const { return function_evaluations_; }

 private:
  Problem& problem_;
  FgmOptions options_;
  double lipschitz_;
  Point u_, x_, y_, grad_;
  double x_value_ = 0.0, y_value_ = 0.0;
  double total_weight_ = 0.0;
  std::size_t k_ = 0;
  std::size_t gradient_evaluations_ = 0, function_evaluations_ = 0;
  FgmStep last_;
};

}  // namespace eqk
