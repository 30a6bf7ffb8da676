#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "mingle/data.hpp"

namespace mingle {

// Visit/code hypergraph: each visit is a hyperedge over its code-nodes, plus
// one singleton self-loop hyperedge per node (added separately) that carries
// fine-grained concept semantics through the hyperedge-update pathway.

enum class EdgeKind { visit, selfloop };

struct Hyperedge {
  std::string edge_id;
  EdgeKind kind = EdgeKind::visit;
  std::vector<int> members;  // node indices, sorted
  std::string visit_id;      // kind == visit only
};

struct Hypergraph {
  std::vector<std::string> node_ids;  // sorted code_ids; index = node index
  std::vector<Hyperedge> edges;       // visit edges (sorted by id) then selfloops (by node)
  std::vector<std::vector<int>> node_edges;  // node index -> incident edge indices
  int n_visit_edges = 0;

  int n_nodes() const { return static_cast<int>(node_ids.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }
  bool has_self_loops() const { return n_visit_edges < n_edges(); }
  int node_of(const std::string& code_id) const;
  int visit_edge_of(const std::string& visit_id) const;

  void rebuild_incidence();

  std::unordered_map<std::string, int> node_index;
  std::unordered_map<std::string, int> visit_edge_index;
};

// One visit-kind hyperedge per visit; node set = union of codes used by any
// visit. Registry codes that no visit uses are reported through `warnings`.
Hypergraph build_hypergraph(const Dataset& ds, std::vector<std::string>* warnings = nullptr);

// Appends one selfloop hyperedge per node. Idempotent.
Hypergraph add_self_loops(const Hypergraph& h);

// Pairwise co-occurrence graph over visit hyperedges; selfloop edges
// contribute nothing. Weight of (i,j) = number of visit edges containing both.
struct WeightedGraph {
  int n = 0;
  std::vector<std::vector<std::pair<int, double>>> adj;  // symmetric, i != j

  size_t edge_count() const;
  double weight(int i, int j) const;
};

WeightedGraph clique_expansion(const Hypergraph& h);

// Both incidence directions as plain index sets (views over the hypergraph).
struct Incidence {
  const std::vector<std::vector<int>>* node_to_edges;
  const std::vector<Hyperedge>* edges;
};

Incidence incidence(const Hypergraph& h);

// Debug dump: edge_id <TAB> kind <TAB> node_id,node_id,...
void dump_hypergraph(const Hypergraph& h, const std::string& path);

}  // namespace mingle
