#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eqk/cost.hpp"

namespace eqk {

using VertexId = std::size_t;
using EdgeId = std::size_t;

struct Edge {
  VertexId tail;
  VertexId head;
  CostParams cost;
};

// Origin-destination pair with demand d_w > 0.
struct OdPair {
  VertexId origin;
  VertexId destination;
  double demand;
};

struct NetworkOptions {
  bool allow_self_loops = false;
};

// Immutable transport network: directed multigraph, edge costs and OD demands.
// Construction validates every invariant, including reachability of each OD pair.
class Network {
 public:
  Network(std::vector<std::string> vertex_names, std::vector<Edge> edges, std::vector<OdPair> od_pairs,
          NetworkOptions options = {});

  std::size_t vertex_count() const { return names_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  std::size_t od_count() const { return od_pairs_.size(); }

  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_[e]; }
  const std::vector<OdPair>& od_pairs() const { return od_pairs_; }
  const std::string& vertex_name(VertexId v) const { return names_[v]; }
  const std::vector<std::string>& vertex_names() const { return names_; }

  // Outgoing / incoming edge ids of v, in increasing edge-id order.
  std::span<const EdgeId> out_edges(VertexId v) const {
    return {out_ids_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
  }
  std::span<const EdgeId> in_edges(VertexId v) const {
    return {in_ids_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
  }

  double total_demand() const;

  // Distinct destinations in increasing vertex order.
  std::vector<VertexId> sinks() const;

  // Vertices with a directed path to `target` (target included).
  std::vector<bool> reaches(VertexId target) const;

  // Copy with every edge switched to `model`; rho and mu_power are kept for BPR.
  Network with_model(CostModel model) const;

 private:
  std::vector<std::string> names_;
  std::vector<Edge> edges_;
  std::vector<OdPair> od_pairs_;
  std::vector<std::size_t> out_offsets_, in_offsets_;
  std::vector<EdgeId> out_ids_, in_ids_;
  NetworkOptions options_;
};

// Vertex numbering for one sink such that every edge between two vertices that
// reach the sink goes from a lower to a higher position. Vertices that cannot
// reach the sink are left out of `order`.
struct TopologicalOrder {
  VertexId sink = 0;
  std::vector<VertexId> order;
  bool valid = false;
};

TopologicalOrder topological_order(const Network& network, VertexId sink);

// Depth-first enumeration of simple paths origin -> destination with at most
// `max_edges` edges, lexicographic in edge ids. The visitor returns false to stop.
// Returns false iff the visitor stopped the enumeration.
bool for_each_simple_path(const Network& network, VertexId origin, VertexId destination,
                          std::size_t max_edges,
                          const std::function<bool(std::span<const EdgeId>)>& visit);

}  // namespace eqk
