#include "eqk/network.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <set>

#include "eqk/error.hpp"

namespace eqk {
namespace {

void build_csr(std::size_t n, const std::vector<Edge>& edges, bool by_tail, std::vector<std::size_t>& offsets,
               std::vector<EdgeId>& ids) {
  offsets.assign(n + 1, 0);
  for (const auto& e : edges) ++offsets[(by_tail ? e.tail : e.head) + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  ids.assign(edges.size(), 0);
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (EdgeId id = 0; id < edges.size(); ++id) {
    const auto v = by_tail ? edges[id].tail : edges[id].head;
    ids[cursor[v]++] = id;
  }
}

}  // namespace

Network::Network(std::vector<std::string> vertex_names, std::vector<Edge> edges, std::vector<OdPair> od_pairs,
                 NetworkOptions options)
    : names_(std::move(vertex_names)), edges_(std::move(edges)), od_pairs_(std::move(od_pairs)), options_(options) {
  const std::size_t n = names_.size();
  for (EdgeId id = 0; id < edges_.size(); ++id) {
    const auto& e = edges_[id];
    if (e.tail >= n || e.head >= n) {
      throw InputError("edge " + std::to_string(id) + " has an endpoint outside the vertex set");
    }
    if (e.tail == e.head && !options_.allow_self_loops) {
      throw InputError("edge " + std::to_string(id) + " is a self-loop at vertex '" + names_[e.tail] + "'");
    }
    try {
      validate(e.cost);
    } catch (const InputError& err) {
      throw InputError("edge " + std::to_string(id) + ": " + err.what());
    }
  }
  build_csr(n, edges_, true, out_offsets_, out_ids_);
  build_csr(n, edges_, false, in_offsets_, in_ids_);

  for (std::size_t w = 0; w < od_pairs_.size(); ++w) {
    const auto& od = od_pairs_[w];
    if (od.origin >= n || od.destination >= n) {
      throw InputError("OD pair " + std::to_string(w) + " references an unknown vertex");
    }
    if (!(od.demand > 0.0)) throw InputError("OD pair " + std::to_string(w) + " has nonpositive demand");
    if (od.origin == od.destination) {
      throw InputError("OD pair " + std::to_string(w) + " has identical origin and destination");
    }
  }
  // One reverse search per distinct sink.
  for (VertexId sink : sinks()) {
    const auto reach = reaches(sink);
    for (std::size_t w = 0; w < od_pairs_.size(); ++w) {
      const auto& od = od_pairs_[w];
      if (od.destination == sink && !reach[od.origin]) {
        throw InputError("unreachable OD pair " + std::to_string(w) + " ('" + names_[od.origin] + "' -> '" +
                         names_[od.destination] + "')");
      }
    }
  }
}

double Network::total_demand() const {
  double total = 0.0;
  for (const auto& od : od_pairs_) total += od.demand;
  return total;
}

std::vector<VertexId> Network::sinks() const {
  std::set<VertexId> s;
  for (const auto& od : od_pairs_) s.insert(od.destination);
  return {s.begin(), s.end()};
}

std::vector<bool> Network::reaches(VertexId target) const {
  std::vector<bool> seen(vertex_count(), false);
  std::deque<VertexId> queue{target};
  seen[target] = true;
  while (!queue.empty()) {
    const VertexId v = queue.front();
    queue.pop_front();
    for (EdgeId e : in_edges(v)) {
      const VertexId u = edges_[e].tail;
      if (!seen[u]) {
        seen[u] = true;
        queue.push_back(u);
      }
    }
  }
  return seen;
}

Network Network::with_model(CostModel model) const {
  auto edges = edges_;
  for (auto& e : edges) e.cost.model = model;
  return Network(names_, std::move(edges), od_pairs_, options_);
}

TopologicalOrder topological_order(const Network& network, VertexId sink) {
  TopologicalOrder result;
  result.sink = sink;
  const auto reach = network.reaches(sink);
  const std::size_t n = network.vertex_count();

  // Kahn's algorithm on the subgraph induced by vertices that reach the sink.
  std::vector<std::size_t> indegree(n, 0);
  std::size_t members = 0;
  for (VertexId v = 0; v < n; ++v) {
    if (!reach[v]) continue;
    ++members;
    for (EdgeId e : network.in_edges(v)) {
      if (reach[network.edge(e).tail]) ++indegree[v];
    }
  }
  std::deque<VertexId> ready;
  for (VertexId v = 0; v < n; ++v) {
    if (reach[v] && indegree[v] == 0) ready.push_back(v);
  }
  while (!ready.empty()) {
    const VertexId v = ready.front();
    ready.pop_front();
    result.order.push_back(v);
    for (EdgeId e : network.out_edges(v)) {
      const VertexId k = network.edge(e).head;
      if (reach[k] && --indegree[k] == 0) ready.push_back(k);
    }
  }
  // In an acyclic reaching subgraph the sink has no reaching successors, so it comes out last.
  result.valid = result.order.size() == members && !result.order.empty() && result.order.back() == sink;
  return result;
}

bool for_each_simple_path(const Network& network, VertexId origin, VertexId destination, std::size_t max_edges,
                          const std::function<bool(std::span<const EdgeId>)>& visit) {
  std::vector<EdgeId> path;
  std::vector<bool> on_path(network.vertex_count(), false);
  const auto reach = network.reaches(destination);

  std::function<bool(VertexId)> dfs = [&](VertexId v) -> bool {
    if (v == destination) return visit(path);
    if (path.size() >= max_edges) return true;
    on_path[v] = true;
    for (EdgeId e : network.out_edges(v)) {
      const VertexId k = network.edge(e).head;
      if (on_path[k] || !reach[k]) continue;
      path.push_back(e);
      const bool keep_going = dfs(k);
      path.pop_back();
      if (!keep_going) {
        on_path[v] = false;
        return false;
      }
    }
    on_path[v] = false;
    return true;
  };
  return dfs(origin);
}

}  // namespace eqk
