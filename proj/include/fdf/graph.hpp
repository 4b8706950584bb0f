#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "fdf/ir.hpp"

namespace fdf {

using Edge = std::pair<PortId, PortId>;

/// Directed graph over ports: inter-box edges (sigma(q), q) plus complete
/// intra-box input -> output edges for every non-implicit box.
struct FdfGraph {
  std::size_t vertex_count = 0;
  std::vector<Edge> edges;  // sorted, unique
  std::vector<std::vector<PortId>> successors;
  std::vector<std::vector<PortId>> predecessors;
  // Tie-break key for deterministic ordering: (owner box index, port id at
  // construction time). Box order puts DataIO first, FuncOut second.
  std::vector<std::pair<std::size_t, std::uint32_t>> tie_key;
  std::optional<std::vector<PortId>> topo;

  bool has_edge(PortId p, PortId q) const;
  std::size_t in_degree(PortId p) const { return predecessors[p.index()].size(); }
  std::size_t out_degree(PortId p) const { return successors[p.index()].size(); }
};

struct CycleWitness {
  std::vector<PortId> ports;
};

FdfGraph build_graph(const Pipeline& pipeline);

/// Assembles a graph from raw edges (used for arbitrary graphs in tests).
FdfGraph make_graph(std::size_t vertex_count, std::vector<Edge> edges,
                    std::vector<std::pair<std::size_t, std::uint32_t>> tie_key = {});

/// Linear-time Kahn traversal. On success stores the order in g.topo and
/// returns nullopt; otherwise returns a shortest cycle through the smallest
/// port that lies on any cycle.
std::optional<CycleWitness> check_well_formed(FdfGraph& g);

/// Renumbers ports 1..m along g.topo (computed on demand). Throws Error
/// (E-CYCLE) when the graph is not a DAG.
Pipeline renumber(const Pipeline& pipeline, FdfGraph g);

/// Non-implicit boxes b0 with some wiring sigma(q) = p, owner(p) = b0, owner(q) = b.
std::set<BoxIndex> direct_predecessors(const Pipeline& pipeline, const FdfGraph& g, BoxIndex b);

}  // namespace fdf
