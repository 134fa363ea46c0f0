#pragma once

// Graph model of bodies and joints: partition into limbs, fundamental cycle
// detection, canonical ground-directed spanning trees and cycle orientation
// bookkeeping.

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "pkmdyn/se3.hpp"

namespace pkmdyn {

// One joint of the topological graph. `from`/`to` carry the edge direction;
// for tree edges the direction points toward the ground (child -> predecessor).
struct JointEdge {
  int id = -1;
  int from = -1;
  int to = -1;
  JointKind kind = JointKind::Revolute;
  int dof = 1;
  bool actuated = false;
  std::string name;
};

// Vertices are body ids, 0 is the ground and `platform` is distinguished.
struct MechanismGraph {
  int num_vertices = 0;
  int ground = 0;
  int platform = -1;
  std::vector<JointEdge> edges;

  const JointEdge& edge(int id) const {
    for (const auto& e : edges)
      if (e.id == id) return e;
    throw ValidationError("graph: unknown edge id " + std::to_string(id));
  }

  void validate() const {
    if (platform < 0 || platform >= num_vertices)
      throw ValidationError("graph: platform vertex not set");
    std::set<int> ids;
    for (const auto& e : edges) {
      if (!ids.insert(e.id).second)
        throw ValidationError("graph: duplicate edge id " + std::to_string(e.id));
      if (e.from < 0 || e.from >= num_vertices || e.to < 0 || e.to >= num_vertices)
        throw ValidationError("graph: edge endpoint out of range");
    }
  }
};

// Subgraph of one limb: connects the ground vertex with the platform vertex.
struct LimbSubgraph {
  int index = 0;
  std::vector<int> vertices;  // includes ground and platform
  std::vector<int> edge_ids;
  int cycle_count = 0;  // gamma_l = |E| - (|V| - 1)
};

// Fundamental cycle, traversed starting at its cut-edge. sigma(i) is +1/-1
// for edges traversed with/against their direction and 0 for edges not in
// the cycle; sigma(cut) = +1 by convention.
struct FundamentalCycle {
  int index = 0;
  int cut_edge = -1;
  std::vector<int> edge_order;  // traversal order, cut-edge first
  std::vector<int> sigma;       // parallel to edge_order
  std::vector<int> vertices;    // traversal order, starting at the cut source

  int sigma_of(int edge_id) const {
    for (size_t i = 0; i < edge_order.size(); ++i)
      if (edge_order[i] == edge_id) return sigma[i];
    return 0;
  }
};

// Per-limb canonical spanning tree. Tree-edges are labeled by their distal
// body; predecessor(i) < i holds after construction.
struct SpanningTree {
  std::vector<int> tree_edges;           // ordered by distal body index
  std::vector<int> cut_edges;            // numbered after the tree edges
  std::map<int, int> predecessor;        // body -> predecessor body (ground = 0)
  std::map<int, int> body_renumbering;   // original id -> canonical id (identity if untouched)
  bool renumbered = false;

  std::vector<int> path_to_ground(int body) const {
    std::vector<int> path;
    while (body != 0) {
      path.push_back(body);  // tree-edge label equals the distal body
      auto it = predecessor.find(body);
      if (it == predecessor.end())
        throw ValidationError("spanning tree: body disconnected from ground");
      body = it->second;
    }
    return path;
  }
};

namespace detail {

inline std::vector<std::vector<std::pair<int, int>>> adjacency(
    const MechanismGraph& g, const std::vector<int>& edge_ids) {
  std::vector<std::vector<std::pair<int, int>>> adj(g.num_vertices);
  for (int id : edge_ids) {
    const JointEdge& e = g.edge(id);
    adj[e.from].push_back({e.to, id});
    adj[e.to].push_back({e.from, id});
  }
  return adj;
}

}  // namespace detail

// Split the mechanism graph into its limbs: connected components of the graph
// with ground and platform removed, together with their boundary edges.
inline std::vector<LimbSubgraph> partition_limbs(const MechanismGraph& g) {
  g.validate();
  std::vector<int> all_edges;
  for (const auto& e : g.edges) all_edges.push_back(e.id);
  auto adj = detail::adjacency(g, all_edges);

  std::vector<int> component(g.num_vertices, -1);
  int ncomp = 0;
  for (int v = 0; v < g.num_vertices; ++v) {
    if (v == g.ground || v == g.platform || component[v] >= 0) continue;
    std::queue<int> bfs;
    bfs.push(v);
    component[v] = ncomp;
    while (!bfs.empty()) {
      int u = bfs.front();
      bfs.pop();
      for (auto [w, id] : adj[u]) {
        if (w == g.ground || w == g.platform || component[w] >= 0) continue;
        component[w] = ncomp;
        bfs.push(w);
      }
    }
    ++ncomp;
  }

  std::vector<LimbSubgraph> limbs(ncomp);
  for (int c = 0; c < ncomp; ++c) limbs[c].index = c;
  std::vector<std::set<int>> verts(ncomp);
  for (const auto& e : g.edges) {
    int c = -1;
    if (e.from != g.ground && e.from != g.platform) c = component[e.from];
    if (e.to != g.ground && e.to != g.platform) {
      int c2 = component[e.to];
      if (c >= 0 && c2 != c)
        throw ValidationError("partition_limbs: edge spans two limbs");
      c = c2;
    }
    if (c < 0)
      throw ValidationError("partition_limbs: edge connects ground and platform directly");
    limbs[c].edge_ids.push_back(e.id);
    verts[c].insert(e.from);
    verts[c].insert(e.to);
  }
  for (int c = 0; c < ncomp; ++c) {
    if (!verts[c].count(g.ground) || !verts[c].count(g.platform))
      throw ValidationError("partition_limbs: limb does not connect ground and platform");
    limbs[c].vertices.assign(verts[c].begin(), verts[c].end());
    limbs[c].cycle_count =
        static_cast<int>(limbs[c].edge_ids.size()) - (static_cast<int>(limbs[c].vertices.size()) - 1);
    if (limbs[c].cycle_count < 0)
      throw ValidationError("partition_limbs: limb subgraph disconnected");
  }
  return limbs;
}

// Fundamental cycles of one limb for a given cut-edge selection. Removing the
// cut-edges must leave a spanning tree of the limb subgraph.
inline std::vector<FundamentalCycle> fundamental_cycles(const MechanismGraph& g,
                                                        const LimbSubgraph& limb,
                                                        const std::vector<int>& cut_edges) {
  if (static_cast<int>(cut_edges.size()) != limb.cycle_count)
    throw ValidationError("fundamental_cycles: cut set size does not match cycle count");

  std::vector<int> tree_ids;
  for (int id : limb.edge_ids)
    if (std::find(cut_edges.begin(), cut_edges.end(), id) == cut_edges.end())
      tree_ids.push_back(id);

  // The remaining edges must form a tree over the limb vertices.
  auto adj = detail::adjacency(g, tree_ids);
  std::map<int, int> parent_vertex;
  std::map<int, int> parent_edge;
  std::queue<int> bfs;
  bfs.push(g.ground);
  parent_vertex[g.ground] = g.ground;
  int visited = 0;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    ++visited;
    for (auto [w, id] : adj[u]) {
      if (parent_vertex.count(w)) continue;
      parent_vertex[w] = u;
      parent_edge[w] = id;
      bfs.push(w);
    }
  }
  if (visited != static_cast<int>(limb.vertices.size()))
    throw ValidationError("fundamental_cycles: cut selection does not break all cycles");

  auto tree_path = [&](int from, int to) {
    // Vertex path from -> to through the tree via the common ancestor.
    std::vector<int> up_from{from}, up_to{to};
    std::set<int> seen(up_from.begin(), up_from.end());
    int v = from;
    while (parent_vertex.at(v) != v) {
      v = parent_vertex.at(v);
      up_from.push_back(v);
      seen.insert(v);
    }
    v = to;
    while (!seen.count(v)) {
      v = parent_vertex.at(v);
      up_to.push_back(v);
    }
    const int ancestor = v;
    std::vector<int> path;
    for (int u : up_from) {
      path.push_back(u);
      if (u == ancestor) break;
    }
    std::vector<int> tail;
    for (int u : up_to) {
      if (u == ancestor) break;
      tail.push_back(u);
    }
    std::reverse(tail.begin(), tail.end());
    for (int u : tail) path.push_back(u);
    return path;
  };

  std::vector<FundamentalCycle> cycles;
  int idx = 0;
  for (int cut : cut_edges) {
    const JointEdge& ce = g.edge(cut);
    FundamentalCycle fc;
    fc.index = idx++;
    fc.cut_edge = cut;
    fc.edge_order.push_back(cut);
    fc.sigma.push_back(+1);  // cut-edge oriented with the cycle by convention
    fc.vertices.push_back(ce.from);
    // Continue from the cut target back to the cut source through the tree.
    std::vector<int> vpath = tree_path(ce.to, ce.from);
    for (size_t i = 0; i + 1 < vpath.size(); ++i) {
      int a = vpath[i], b = vpath[i + 1];
      // Edge between a and b in the tree: one of them is the tree-parent.
      int id = parent_vertex.at(a) == b ? parent_edge.at(a) : parent_edge.at(b);
      const JointEdge& e = g.edge(id);
      fc.edge_order.push_back(id);
      fc.sigma.push_back(e.from == a ? +1 : -1);
      fc.vertices.push_back(a);
    }
    cycles.push_back(std::move(fc));
  }
  return cycles;
}

// Canonical ground-directed spanning tree of a limb for a given cut selection.
// Renumbers bodies if the supplied numbering is not canonical; the original
// to canonical mapping is retained.
inline SpanningTree build_spanning_tree(const MechanismGraph& g, const LimbSubgraph& limb,
                                        const std::vector<int>& cut_edges) {
  std::vector<int> tree_ids;
  for (int id : limb.edge_ids)
    if (std::find(cut_edges.begin(), cut_edges.end(), id) == cut_edges.end())
      tree_ids.push_back(id);

  auto adj = detail::adjacency(g, tree_ids);
  SpanningTree st;
  std::map<int, int> pred;
  std::queue<int> bfs;
  bfs.push(g.ground);
  pred[g.ground] = g.ground;
  while (!bfs.empty()) {
    int u = bfs.front();
    bfs.pop();
    for (auto [w, id] : adj[u]) {
      if (pred.count(w)) continue;
      pred[w] = u;
      bfs.push(w);
    }
  }
  if (static_cast<int>(pred.size()) != static_cast<int>(limb.vertices.size()))
    throw ValidationError("build_spanning_tree: cut selection does not yield a tree");

  bool canonical = true;
  for (int v : limb.vertices) {
    if (v == g.ground) continue;
    if (pred.at(v) != g.ground && pred.at(v) >= v) canonical = false;
  }

  std::map<int, int> renum;  // original -> canonical (1..n within the limb)
  if (canonical) {
    for (int v : limb.vertices) renum[v] = v;
  } else {
    // BFS order from the ground gives a canonical labeling.
    st.renumbered = true;
    int next = 1;
    std::queue<int> q2;
    q2.push(g.ground);
    renum[g.ground] = 0;
    std::set<int> done{g.ground};
    while (!q2.empty()) {
      int u = q2.front();
      q2.pop();
      std::vector<int> nbrs;
      for (auto [w, id] : adj[u])
        if (!done.count(w)) nbrs.push_back(w);
      std::sort(nbrs.begin(), nbrs.end());
      for (int w : nbrs) {
        renum[w] = next++;
        done.insert(w);
        q2.push(w);
      }
    }
  }
  st.body_renumbering = renum;
  for (int v : limb.vertices) {
    if (v == g.ground) continue;
    st.predecessor[renum.count(v) ? renum[v] : v] = renum[pred.at(v)];
  }

  // Tree edges labeled by their distal (canonical) body index.
  std::vector<std::pair<int, int>> labeled;  // (canonical distal body, edge id)
  for (int id : tree_ids) {
    const JointEdge& e = g.edge(id);
    // The distal endpoint is the one whose tree-predecessor lies across the edge.
    int distal = (pred.at(e.from) == e.to) ? e.from : e.to;
    labeled.push_back({renum[distal], id});
  }
  std::sort(labeled.begin(), labeled.end());
  for (auto& [body, id] : labeled) st.tree_edges.push_back(id);
  st.cut_edges = cut_edges;
  return st;
}

// A limb is hybrid when every pair of its fundamental cycles shares at most
// one vertex (edge-disjoint cycles in series).
inline bool is_hybrid(const std::vector<FundamentalCycle>& cycles) {
  for (size_t i = 0; i < cycles.size(); ++i) {
    for (size_t j = i + 1; j < cycles.size(); ++j) {
      std::set<int> vi(cycles[i].vertices.begin(), cycles[i].vertices.end());
      int shared = 0;
      for (int v : cycles[j].vertices)
        if (vi.count(v)) ++shared;
      if (shared > 1) return false;
    }
  }
  return true;
}

}  // namespace pkmdyn
