#include "mingle/hypergraph.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "mingle/common.hpp"

namespace mingle {

int Hypergraph::node_of(const std::string& code_id) const {
  auto it = node_index.find(code_id);
  if (it == node_index.end()) throw DataError("code_id is not a hypergraph node: " + code_id);
  return it->second;
}

int Hypergraph::visit_edge_of(const std::string& visit_id) const {
  auto it = visit_edge_index.find(visit_id);
  if (it == visit_edge_index.end()) throw DataError("no visit hyperedge for visit_id: " + visit_id);
  return it->second;
}

void Hypergraph::rebuild_incidence() {
  node_index.clear();
  visit_edge_index.clear();
  for (size_t i = 0; i < node_ids.size(); ++i) node_index[node_ids[i]] = static_cast<int>(i);
  node_edges.assign(node_ids.size(), {});
  for (size_t e = 0; e < edges.size(); ++e) {
    for (int v : edges[e].members) node_edges[v].push_back(static_cast<int>(e));
    if (edges[e].kind == EdgeKind::visit) visit_edge_index[edges[e].visit_id] = static_cast<int>(e);
  }
}

Hypergraph build_hypergraph(const Dataset& ds, std::vector<std::string>* warnings) {
  std::set<std::string> used;
  for (const auto& v : ds.visits) {
    if (v.codes.empty()) throw DataError("empty visit: " + v.visit_id);
    used.insert(v.codes.begin(), v.codes.end());
  }

  Hypergraph h;
  h.node_ids.assign(used.begin(), used.end());  // set iteration is sorted
  std::unordered_map<std::string, int> idx;
  for (size_t i = 0; i < h.node_ids.size(); ++i) idx[h.node_ids[i]] = static_cast<int>(i);

  if (warnings) {
    for (const auto& c : ds.codes)
      if (!used.count(c.code_id)) warnings->push_back("registry code never used in any visit: " + c.code_id);
  }

  std::vector<const VisitRecord*> ordered;
  ordered.reserve(ds.visits.size());
  for (const auto& v : ds.visits) ordered.push_back(&v);
  std::sort(ordered.begin(), ordered.end(),
            [](const VisitRecord* a, const VisitRecord* b) { return a->visit_id < b->visit_id; });

  for (const VisitRecord* v : ordered) {
    Hyperedge e;
    e.edge_id = v->visit_id;
    e.kind = EdgeKind::visit;
    e.visit_id = v->visit_id;
    for (const auto& cid : v->codes) e.members.push_back(idx.at(cid));
    std::sort(e.members.begin(), e.members.end());
    h.edges.push_back(std::move(e));
  }
  h.n_visit_edges = static_cast<int>(h.edges.size());
  h.rebuild_incidence();
  return h;
}

Hypergraph add_self_loops(const Hypergraph& h) {
  Hypergraph out = h;
  std::set<int> existing;
  for (const auto& e : out.edges)
    if (e.kind == EdgeKind::selfloop && e.members.size() == 1) existing.insert(e.members[0]);

  for (int v = 0; v < out.n_nodes(); ++v) {
    if (existing.count(v)) continue;
    Hyperedge e;
    e.edge_id = "loop:" + out.node_ids[v];
    e.kind = EdgeKind::selfloop;
    e.members = {v};
    out.edges.push_back(std::move(e));
  }
  out.rebuild_incidence();
  return out;
}

size_t WeightedGraph::edge_count() const {
  size_t c = 0;
  for (const auto& nbrs : adj) c += nbrs.size();
  return c / 2;
}

double WeightedGraph::weight(int i, int j) const {
  for (const auto& [k, w] : adj[i])
    if (k == j) return w;
  return 0.0;
}

WeightedGraph clique_expansion(const Hypergraph& h) {
  WeightedGraph g;
  g.n = h.n_nodes();
  std::vector<std::map<int, double>> acc(g.n);
  for (const auto& e : h.edges) {
    if (e.kind != EdgeKind::visit) continue;
    for (size_t a = 0; a < e.members.size(); ++a) {
      for (size_t b = a + 1; b < e.members.size(); ++b) {
        int i = e.members[a], j = e.members[b];
        acc[i][j] += 1.0;
        acc[j][i] += 1.0;
      }
    }
  }
  g.adj.resize(g.n);
  for (int i = 0; i < g.n; ++i) g.adj[i].assign(acc[i].begin(), acc[i].end());
  return g;
}

Incidence incidence(const Hypergraph& h) { return {&h.node_edges, &h.edges}; }

void dump_hypergraph(const Hypergraph& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& e : h.edges) {
    out << e.edge_id << '\t' << (e.kind == EdgeKind::visit ? "visit" : "selfloop") << '\t';
    for (size_t i = 0; i < e.members.size(); ++i) out << (i ? "," : "") << h.node_ids[e.members[i]];
    out << '\n';
  }
}

}  // namespace mingle
