#include "qgraph/graph.hpp"

#include "qgraph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace qgraph {

MetricGraph MetricGraph::build(std::vector<std::string> vertices, const std::vector<BondSpec>& bonds) {
  if (bonds.empty()) throw ValidationError("graph: empty bond list");
  if (vertices.empty()) throw ValidationError("graph: empty vertex list");

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    if (!index.emplace(vertices[v], v).second) throw ValidationError("graph: duplicate vertex '" + vertices[v] + "'");
  }

  MetricGraph g;
  g.vertices_ = std::move(vertices);
  g.degrees_.assign(g.vertices_.size(), 0);
  g.lengths_.resize(static_cast<Eigen::Index>(bonds.size()));

  for (std::size_t b = 0; b < bonds.size(); ++b) {
    const auto& spec = bonds[b];
    if (!(spec.length > 0.0) || !std::isfinite(spec.length)) {
      std::ostringstream msg;
      msg << "graph: non-positive length " << spec.length << " on bond " << b;
      throw ValidationError(msg.str());
    }
    auto from = index.find(spec.from);
    auto to = index.find(spec.to);
    if (from == index.end() || to == index.end()) {
      const auto& bad = from == index.end() ? spec.from : spec.to;
      throw ValidationError("graph: bond " + std::to_string(b) + " references unknown vertex '" + bad + "'");
    }
    g.bonds_.push_back({from->second, to->second, spec.length});
    g.lengths_[static_cast<Eigen::Index>(b)] = spec.length;
    // a loop contributes two bond ends to its vertex
    ++g.degrees_[from->second];
    ++g.degrees_[to->second];
  }

  for (std::size_t v = 0; v < g.vertices_.size(); ++v) {
    if (g.degrees_[v] == 0) throw ValidationError("graph: vertex '" + g.vertices_[v] + "' has degree 0");
  }
  return g;
}

RVector MetricGraph::directed_lengths() const {
  RVector out(static_cast<Eigen::Index>(dim()));
  out << lengths_, lengths_;
  return out;
}

std::size_t MetricGraph::vertex_index(const std::string& name) const {
  auto it = std::find(vertices_.begin(), vertices_.end(), name);
  if (it == vertices_.end()) throw ValidationError("graph: unknown vertex '" + name + "'");
  return static_cast<std::size_t>(it - vertices_.begin());
}

std::size_t MetricGraph::directed_source(std::size_t d) const {
  const auto& bond = bonds_.at(d % num_bonds());
  return d < num_bonds() ? bond.from : bond.to;
}

std::size_t MetricGraph::directed_target(std::size_t d) const {
  const auto& bond = bonds_.at(d % num_bonds());
  return d < num_bonds() ? bond.to : bond.from;
}

bool MetricGraph::has_loops() const {
  return std::any_of(bonds_.begin(), bonds_.end(), [](const Bond& b) { return b.from == b.to; });
}

std::vector<std::string> MetricGraph::warnings() const {
  std::vector<std::string> out;
  if (num_bonds() == 1) out.emplace_back("B=1: all statistics degenerate");
  if (has_loops()) out.emplace_back("graph has loops: expect persistent eigenvalues of multiplicity two");
  return out;
}

MetricGraph MetricGraph::with_lengths(const RVector& lengths) const {
  if (static_cast<std::size_t>(lengths.size()) != num_bonds()) {
    throw ValidationError("graph: expected " + std::to_string(num_bonds()) + " lengths");
  }
  std::vector<BondSpec> specs;
  for (std::size_t b = 0; b < num_bonds(); ++b) {
    specs.push_back({vertices_[bonds_[b].from], vertices_[bonds_[b].to], lengths[static_cast<Eigen::Index>(b)]});
  }
  return build(vertices_, specs);
}

namespace {

void check_dim(const MetricGraph& graph, const CMatrix& m, const char* what) {
  const auto n = static_cast<Eigen::Index>(graph.dim());
  if (m.rows() != n || m.cols() != n) {
    std::ostringstream msg;
    msg << what << ": dimension " << m.rows() << "x" << m.cols() << " does not match 2B = " << n;
    throw ValidationError(msg.str());
  }
}

}  // namespace

BondScatteringMatrix BondScatteringMatrix::from_matrix(const MetricGraph& graph, CMatrix entries, double tol) {
  auto report = validate_unitary(graph, entries, tol);
  if (!report.passed) {
    std::ostringstream msg;
    msg << "scattering matrix rejected: unitarity deviation " << report.max_deviation << ", "
        << report.mask_violations.size() << " connectivity violations (tol " << tol << ")";
    throw ValidationError(msg.str());
  }
  return BondScatteringMatrix(std::move(entries));
}

Observable Observable::from_matrix(const MetricGraph& graph, CMatrix entries, double tol) {
  check_dim(graph, entries, "observable");
  const double dev = (entries - entries.adjoint()).cwiseAbs().maxCoeff();
  if (dev > tol) {
    std::ostringstream msg;
    msg << "observable is not Hermitian (deviation " << dev << ")";
    throw ValidationError(msg.str());
  }
  return Observable(std::move(entries));
}

BondScatteringMatrix kirchhoff_s0(const MetricGraph& graph) {
  const std::size_t n = graph.dim();
  CMatrix s = CMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t in = 0; in < n; ++in) {
    const std::size_t v = graph.directed_target(in);
    const double transmit = 2.0 / static_cast<double>(graph.degree(v));
    for (std::size_t out = 0; out < n; ++out) {
      if (graph.directed_source(out) != v) continue;
      const double value = out == graph.reversed(in) ? transmit - 1.0 : transmit;
      s(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)) = value;
    }
  }
  return BondScatteringMatrix(std::move(s));
}

UnitarityReport validate_unitary(const MetricGraph& graph, const CMatrix& matrix, double tol) {
  check_dim(graph, matrix, "validate_unitary");
  UnitarityReport report;
  report.tolerance = tol;
  const auto n = matrix.rows();
  report.max_deviation = (matrix * matrix.adjoint() - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
  for (Eigen::Index out = 0; out < n; ++out) {
    for (Eigen::Index in = 0; in < n; ++in) {
      const double mag = std::abs(matrix(out, in));
      if (mag <= tol) continue;
      if (graph.directed_target(static_cast<std::size_t>(in)) != graph.directed_source(static_cast<std::size_t>(out))) {
        report.mask_violations.push_back({static_cast<std::size_t>(out), static_cast<std::size_t>(in), mag});
      }
    }
  }
  report.passed = report.max_deviation <= tol && report.mask_violations.empty();
  return report;
}

CMatrix phase_times_s0(const RVector& phases, const BondScatteringMatrix& s0) {
  const auto b = phases.size();
  CMatrix u = s0.matrix();
  for (Eigen::Index k = 0; k < b; ++k) {
    const Complex z = std::polar(1.0, phases[k]);
    u.row(k) *= z;
    u.row(k + b) *= z;
  }
  return u;
}

CMatrix evolution_operator(const MetricGraph& graph, const BondScatteringMatrix& s0, double lambda) {
  if (s0.dim() != graph.dim()) throw ValidationError("evolution_operator: S0 dimension does not match graph");
  return phase_times_s0(lambda * graph.lengths(), s0);
}

Observable length_observable(const MetricGraph& graph) {
  return Observable(graph.directed_lengths().cast<Complex>().asDiagonal());
}

Observable bond_projector(const MetricGraph& graph, std::size_t bond) {
  if (bond >= graph.num_bonds()) throw ValidationError("bond_projector: bond index out of range");
  const auto n = static_cast<Eigen::Index>(graph.dim());
  CMatrix p = CMatrix::Zero(n, n);
  p(static_cast<Eigen::Index>(bond), static_cast<Eigen::Index>(bond)) = 1.0;
  const auto rev = static_cast<Eigen::Index>(bond + graph.num_bonds());
  p(rev, rev) = 1.0;
  return Observable(std::move(p));
}

}  // namespace qgraph
