#include "fdf/graph.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

namespace fdf {

bool FdfGraph::has_edge(PortId p, PortId q) const {
  return std::binary_search(edges.begin(), edges.end(), Edge{p, q});
}

FdfGraph make_graph(std::size_t n, std::vector<Edge> edges,
                    std::vector<std::pair<std::size_t, std::uint32_t>> tie_key) {
  FdfGraph g;
  g.vertex_count = n;
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  g.edges = std::move(edges);
  g.successors.assign(n, {});
  g.predecessors.assign(n, {});
  for (const auto& [p, q] : g.edges) {
    g.successors[p.index()].push_back(q);
    g.predecessors[q.index()].push_back(p);
  }
  if (tie_key.empty()) {
    tie_key.resize(n);
    for (std::size_t i = 0; i < n; ++i) tie_key[i] = {0, static_cast<std::uint32_t>(i + 1)};
  }
  g.tie_key = std::move(tie_key);
  return g;
}

FdfGraph build_graph(const Pipeline& p) {
  std::vector<Edge> edges;
  for (const Port& q : p.ports) {
    if (q.is_input() && p.sigma[q.index()]) edges.emplace_back(*p.sigma[q.index()], q.id);
  }
  for (BoxIndex b : p.user_boxes()) {
    const auto ins = p.inputs_of(b);
    const auto outs = p.outputs_of(b);
    for (PortId i : ins)
      for (PortId o : outs) edges.emplace_back(i, o);
  }
  std::vector<std::pair<std::size_t, std::uint32_t>> keys;
  keys.reserve(p.ports.size());
  for (const Port& q : p.ports) keys.emplace_back(q.box, q.id.value);
  return make_graph(p.port_count(), std::move(edges), std::move(keys));
}

namespace {

CycleWitness find_cycle(const FdfGraph& g, const std::vector<std::size_t>& residual_indeg) {
  const std::size_t n = g.vertex_count;
  for (std::size_t start = 0; start < n; ++start) {
    if (residual_indeg[start] == 0) continue;
    // BFS from `start` inside the residual subgraph, looking for an edge back.
    std::vector<long> parent(n, -1);
    std::vector<bool> seen(n, false);
    std::deque<std::size_t> queue{start};
    seen[start] = true;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      for (PortId w : g.successors[v]) {
        const std::size_t wi = w.index();
        if (residual_indeg[wi] == 0) continue;
        if (wi == start) {
          std::vector<PortId> cycle;
          for (long u = static_cast<long>(v); u != -1; u = parent[u])
            cycle.push_back(PortId(static_cast<std::uint32_t>(u + 1)));
          std::reverse(cycle.begin(), cycle.end());
          return CycleWitness{std::move(cycle)};
        }
        if (!seen[wi]) {
          seen[wi] = true;
          parent[wi] = static_cast<long>(v);
          queue.push_back(wi);
        }
      }
    }
  }
  return {};
}

}  // namespace

std::optional<CycleWitness> check_well_formed(FdfGraph& g) {
  const std::size_t n = g.vertex_count;
  std::vector<std::size_t> indeg(n);
  for (std::size_t i = 0; i < n; ++i) indeg[i] = g.predecessors[i].size();

  auto by_key = [&](PortId a, PortId b) { return g.tie_key[a.index()] < g.tie_key[b.index()]; };

  std::deque<PortId> queue;
  {
    std::vector<PortId> roots;
    for (std::size_t i = 0; i < n; ++i)
      if (indeg[i] == 0) roots.emplace_back(static_cast<std::uint32_t>(i + 1));
    std::sort(roots.begin(), roots.end(), by_key);
    queue.assign(roots.begin(), roots.end());
  }

  std::vector<PortId> order;
  order.reserve(n);
  std::vector<PortId> released;
  while (!queue.empty()) {
    const PortId v = queue.front();
    queue.pop_front();
    order.push_back(v);
    released.clear();
    for (PortId w : g.successors[v.index()])
      if (--indeg[w.index()] == 0) released.push_back(w);
    std::sort(released.begin(), released.end(), by_key);
    queue.insert(queue.end(), released.begin(), released.end());
  }

  if (order.size() == n) {
    g.topo = std::move(order);
    return std::nullopt;
  }
  g.topo.reset();
  return find_cycle(g, indeg);
}

Pipeline renumber(const Pipeline& p, FdfGraph g) {
  if (!g.topo) {
    if (auto cycle = check_well_formed(g)) {
      std::string msg = "pipeline is not a DAG; cycle through ports";
      for (PortId q : cycle->ports) msg += " " + std::to_string(q.value);
      throw Error(codes::kCycle, msg);
    }
  }
  const auto& topo = *g.topo;
  std::vector<PortId> new_id(p.port_count());
  for (std::size_t i = 0; i < topo.size(); ++i)
    new_id[topo[i].index()] = PortId(static_cast<std::uint32_t>(i + 1));

  Pipeline out;
  out.name = p.name;
  out.boxes = p.boxes;
  out.ports.resize(p.port_count());
  out.sigma.resize(p.port_count());
  for (const Port& q : p.ports) {
    Port moved = q;
    moved.id = new_id[q.index()];
    out.ports[moved.id.index()] = std::move(moved);
    if (const auto& s = p.sigma[q.index()]; s && p.contains(*s))
      out.sigma[new_id[q.index()].index()] = new_id[s->index()];
  }
  out.same_type = p.same_type;
  for (auto& d : out.same_type) {
    if (d.lhs.port) d.lhs.port = new_id[d.lhs.port->index()];
    if (d.rhs.port) d.rhs.port = new_id[d.rhs.port->index()];
  }
  return out;
}

std::set<BoxIndex> direct_predecessors(const Pipeline& p, const FdfGraph& g, BoxIndex b) {
  std::set<BoxIndex> out;
  for (const Port& q : p.ports) {
    if (q.box != b || !q.is_input()) continue;
    for (PortId src : g.predecessors[q.index()]) {
      const BoxIndex b0 = p.port(src).box;
      if (!is_implicit(p.boxes[b0].kind)) out.insert(b0);
    }
  }
  return out;
}

}  // namespace fdf
