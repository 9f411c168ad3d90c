#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "eqk/network.hpp"

namespace eqk::test {

struct E {
  std::string tail, head;
  CostParams cost;
};

struct Od {
  std::string origin, destination;
  double demand;
};

// Network from named endpoints; vertices are indexed in order of first appearance.
inline Network make_network(const std::vector<E>& edges, const std::vector<Od>& ods, NetworkOptions options = {}) {
  std::vector<std::string> names;
  auto id = [&](const std::string& s) {
    auto it = std::find(names.begin(), names.end(), s);
    if (it != names.end()) return static_cast<VertexId>(it - names.begin());
    names.push_back(s);
    return names.size() - 1;
  };
  std::vector<Edge> es;
  for (const auto& e : edges) {
    const auto t = id(e.tail);
    const auto h = id(e.head);
    es.push_back({t, h, e.cost});
  }
  std::vector<OdPair> os;
  for (const auto& o : ods) {
    const auto a = id(o.origin);
    const auto b = id(o.destination);
    os.push_back({a, b, o.demand});
  }
  return Network(std::move(names), std::move(es), std::move(os), options);
}

inline CostParams linear(double t_free, double slope = 0.0) {
  // tau = t_free + slope * f as a BPR edge with mu_power 1.
  return slope == 0.0 ? CostParams::bpr(t_free, 1.0, 0.0, 1.0) : CostParams::bpr(t_free, t_free / slope, 1.0, 1.0);
}

inline VertexId vertex(const Network& net, const std::string& name) {
  const auto& names = net.vertex_names();
  return static_cast<VertexId>(std::find(names.begin(), names.end(), name) - names.begin());
}

// Independent ln sum exp for test oracles.
inline double lse(const std::vector<double>& v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// Random times t >= t_free.
inline std::vector<double> random_times(const Network& net, std::mt19937_64& rng, double spread = 1.0) {
  std::uniform_real_distribution<double> u(0.0, spread);
  std::vector<double> t(net.edge_count());
  for (EdgeId e = 0; e < t.size(); ++e) t[e] = net.edge(e).cost.t_free * (1.0 + u(rng));
  return t;
}

// Minimizer of a unimodal function by golden-section search.
inline double golden_min(const std::function<double(double)>& f, double lo, double hi, int iters = 200) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace eqk::test
