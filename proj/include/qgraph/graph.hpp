#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

namespace qgraph {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

struct BondSpec {
  std::string from;
  std::string to;
  double length = 0.0;
};

struct Bond {
  std::size_t from = 0;
  std::size_t to = 0;
  double length = 0.0;
};

// Combinatorial graph with positive bond lengths.
//
// Directed bonds are indexed 0..2B-1: bond b in spec order travels
// from -> to with index b, and to -> from with index b + B. This ordering is
// part of the public contract (stored eigenvectors are indexed by it).
class MetricGraph {
 public:
  // Validates and builds. Throws ValidationError on an empty bond list, a
  // non-positive length, an unknown endpoint or a vertex of degree zero.
  static MetricGraph build(std::vector<std::string> vertices,
                           const std::vector<BondSpec>& bonds);

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_bonds() const { return bonds_.size(); }
  std::size_t dim() const { return 2 * bonds_.size(); }

  const std::vector<std::string>& vertices() const { return vertices_; }
  const std::vector<Bond>& bonds() const { return bonds_; }
  const RVector& lengths() const { return lengths_; }

  // Lengths repeated over forward and reverse directed bonds (size 2B).
  RVector directed_lengths() const;

  std::size_t degree(std::size_t vertex) const { return degrees_.at(vertex); }
  std::size_t vertex_index(const std::string& name) const;

  // Vertex a directed bond leaves from / arrives at.
  std::size_t directed_source(std::size_t d) const;
  std::size_t directed_target(std::size_t d) const;
  // Index of the same bond traversed in the opposite direction.
  std::size_t reversed(std::size_t d) const { return d < num_bonds() ? d + num_bonds() : d - num_bonds(); }

  double min_length() const { return lengths_.minCoeff(); }
  double max_length() const { return lengths_.maxCoeff(); }
  double total_length() const { return lengths_.sum(); }
  double mean_length() const { return lengths_.mean(); }

  bool has_loops() const;
  // Structural warnings (loops, B = 1); empty for an unremarkable graph.
  std::vector<std::string> warnings() const;

  // Same topology with new bond lengths (validated).
  MetricGraph with_lengths(const RVector& lengths) const;

 private:
  MetricGraph() = default;

  std::vector<std::string> vertices_;
  std::vector<Bond> bonds_;
  RVector lengths_;
  std::vector<std::size_t> degrees_;
};

// Unitary 2B x 2B matrix on directed bonds respecting the vertex connectivity.
//
// Column index = incoming directed bond (v1, v2), row index = outgoing
// directed bond (v3, v4); an entry may be nonzero only if v2 == v3, so that
// S * c performs one scattering step on the coefficient vector c.
class BondScatteringMatrix {
 public:
  // Wraps a user supplied matrix; throws ValidationError unless it passes
  // validate_unitary at `tol`.
  static BondScatteringMatrix from_matrix(const MetricGraph& graph, CMatrix entries, double tol = 1e-12);

  const CMatrix& matrix() const { return entries_; }
  std::size_t dim() const { return static_cast<std::size_t>(entries_.rows()); }

 private:
  friend BondScatteringMatrix kirchhoff_s0(const MetricGraph& graph);
  explicit BondScatteringMatrix(CMatrix entries) : entries_(std::move(entries)) {}

  CMatrix entries_;
};

class Observable;
Observable length_observable(const MetricGraph& graph);
Observable bond_projector(const MetricGraph& graph, std::size_t bond);

// Hermitian 2B x 2B matrix acting on directed-bond amplitudes.
class Observable {
 public:
  static Observable from_matrix(const MetricGraph& graph, CMatrix entries, double tol = 1e-12);

  const CMatrix& matrix() const { return entries_; }
  std::size_t dim() const { return static_cast<std::size_t>(entries_.rows()); }

 private:
  friend Observable length_observable(const MetricGraph& graph);
  friend Observable bond_projector(const MetricGraph& graph, std::size_t bond);
  explicit Observable(CMatrix entries) : entries_(std::move(entries)) {}
  CMatrix entries_;
};

struct MaskViolation {
  std::size_t row = 0;
  std::size_t col = 0;
  double magnitude = 0.0;
};

struct UnitarityReport {
  double max_deviation = 0.0;  // max |(S S^dagger - I)_ij|
  std::vector<MaskViolation> mask_violations;
  double tolerance = 0.0;
  bool passed = false;
};

// Kirchhoff (Neumann) vertex conditions:
//   S[(v3,v4), (v1,v2)] = delta(v2, v3) * (2 / d_v2 - [outgoing is the reverse of incoming]).
BondScatteringMatrix kirchhoff_s0(const MetricGraph& graph);

// Reports the unitarity defect and every entry that is nonzero (beyond tol)
// where the connectivity mask forbids it. Throws ValidationError on a
// dimension mismatch.
UnitarityReport validate_unitary(const MetricGraph& graph, const CMatrix& matrix, double tol = 1e-12);

// diag(e^{i x_b}) doubled to 2B, times S0. `phases` has B entries.
CMatrix phase_times_s0(const RVector& phases, const BondScatteringMatrix& s0);

// U(lambda) = e^{i lambda L} S0 with L = diag(L, L).
CMatrix evolution_operator(const MetricGraph& graph, const BondScatteringMatrix& s0, double lambda);

// diag(L_1..L_B, L_1..L_B).
Observable length_observable(const MetricGraph& graph);

// Projector onto both directed copies of bond b.
Observable bond_projector(const MetricGraph& graph, std::size_t bond);

}  // namespace qgraph
