#pragma once

#include "qgraph/graph.hpp"

#include <filesystem>
#include <string>

namespace qgraph {

// A graph together with its vertex conditions, as read from a graph spec file.
struct GraphSpec {
  MetricGraph graph;
  BondScatteringMatrix s0;
  std::string conditions;  // "kirchhoff" or "matrix"
};

// Graph spec files are JSON:
//
//   {
//     "vertices": ["c", "t1", "t2"],
//     "bonds": [ {"from": "c", "to": "t1", "length": 1.0}, ... ],
//     "conditions": "kirchhoff"                      // optional, the default
//   }
//
// `conditions` may instead be an object {"matrix": [[re, im], ...]} holding
// the 2B x 2B scattering matrix row-major, rows indexed by outgoing directed
// bond. The matrix must pass validate_unitary at 1e-12.
GraphSpec parse_graph_spec(const std::string& text);
GraphSpec load_graph_spec(const std::filesystem::path& path);

std::string to_json(const MetricGraph& graph);

}  // namespace qgraph
