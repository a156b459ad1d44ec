#include "qgraph/graph_io.hpp"

#include "qgraph/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace qgraph {

using nlohmann::json;

namespace {

CMatrix parse_matrix(const json& rows, std::size_t dim) {
  if (!rows.is_array() || rows.size() != dim * dim) {
    throw ValidationError("graph spec: conditions.matrix must hold " + std::to_string(dim * dim) + " [re, im] pairs");
  }
  const auto n = static_cast<Eigen::Index>(dim);
  CMatrix m(n, n);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& pair = rows[k];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
      throw ValidationError("graph spec: matrix entry " + std::to_string(k) + " is not an [re, im] pair");
    }
    m(static_cast<Eigen::Index>(k / dim), static_cast<Eigen::Index>(k % dim)) =
        Complex(pair[0].get<double>(), pair[1].get<double>());
  }
  return m;
}

}  // namespace

GraphSpec parse_graph_spec(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("graph spec: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("graph spec: top level must be an object");
  if (!doc.contains("vertices") || !doc["vertices"].is_array()) {
    throw ValidationError("graph spec: missing 'vertices' list");
  }
  if (!doc.contains("bonds") || !doc["bonds"].is_array()) throw ValidationError("graph spec: missing 'bonds' list");

  std::vector<std::string> vertices;
  for (const auto& v : doc["vertices"]) {
    if (!v.is_string()) throw ValidationError("graph spec: vertex names must be strings");
    vertices.push_back(v.get<std::string>());
  }
  std::vector<BondSpec> bonds;
  for (const auto& b : doc["bonds"]) {
    if (!b.is_object() || !b.contains("from") || !b.contains("to") || !b.contains("length")) {
      throw ValidationError("graph spec: each bond needs 'from', 'to' and 'length'");
    }
    if (!b["length"].is_number()) throw ValidationError("graph spec: bond length must be a number");
    bonds.push_back({b["from"].get<std::string>(), b["to"].get<std::string>(), b["length"].get<double>()});
  }

  auto graph = MetricGraph::build(std::move(vertices), bonds);

  if (!doc.contains("conditions") || doc["conditions"] == "kirchhoff") {
    auto s0 = kirchhoff_s0(graph);
    return {std::move(graph), std::move(s0), "kirchhoff"};
  }
  const auto& cond = doc["conditions"];
  if (cond.is_object() && cond.contains("matrix")) {
    auto s0 = BondScatteringMatrix::from_matrix(graph, parse_matrix(cond["matrix"], graph.dim()));
    return {std::move(graph), std::move(s0), "matrix"};
  }
  throw ValidationError("graph spec: 'conditions' must be \"kirchhoff\" or {\"matrix\": [...]}");
}

GraphSpec load_graph_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open graph spec '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_graph_spec(buf.str());
}

std::string to_json(const MetricGraph& graph) {
  json doc;
  doc["vertices"] = graph.vertices();
  doc["bonds"] = json::array();
  for (const auto& b : graph.bonds()) {
    doc["bonds"].push_back({{"from", graph.vertices()[b.from]}, {"to", graph.vertices()[b.to]}, {"length", b.length}});
  }
  return doc.dump();
}

}  // namespace qgraph
