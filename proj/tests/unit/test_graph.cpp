#include "qgraph/errors.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/graph_io.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qgraph;

namespace {

MetricGraph interval(double length = M_PI) { return MetricGraph::build({"u", "v"}, {{"u", "v", length}}); }

MetricGraph star3() {
  return MetricGraph::build({"c", "t1", "t2", "t3"}, {{"c", "t1", 1.0}, {"c", "t2", 1.05}, {"c", "t3", 0.95}});
}

}  // namespace

TEST(Graph, BuildsIntervalAndStar) {
  const auto g = interval();
  EXPECT_EQ(g.num_bonds(), 1u);
  EXPECT_EQ(g.dim(), 2u);

  const auto s = star3();
  EXPECT_EQ(s.num_bonds(), 3u);
  EXPECT_EQ(s.degree(s.vertex_index("c")), 3u);
  for (const char* t : {"t1", "t2", "t3"}) EXPECT_EQ(s.degree(s.vertex_index(t)), 1u);
}

TEST(Graph, DirectedBondIndexing) {
  const auto s = star3();
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(s.directed_source(b), s.directed_target(b + 3));
    EXPECT_EQ(s.directed_target(b), s.directed_source(b + 3));
    EXPECT_EQ(s.reversed(b), b + 3);
    EXPECT_EQ(s.reversed(b + 3), b);
  }
}

TEST(Graph, RejectsInvalidSpecs) {
  EXPECT_THROW(MetricGraph::build({"a", "b"}, {{"a", "b", 0.0}}), ValidationError);
  EXPECT_THROW(MetricGraph::build({"a", "b"}, {{"a", "b", -1.0}}), ValidationError);
  EXPECT_THROW(MetricGraph::build({"a", "b"}, {{"a", "x", 1.0}}), ValidationError);
  EXPECT_THROW(MetricGraph::build({"a", "b"}, {}), ValidationError);
  EXPECT_THROW(MetricGraph::build({"a", "b", "c"}, {{"a", "b", 1.0}}), ValidationError);
  try {
    MetricGraph::build({"c", "a", "b"}, {{"c", "a", 1.0}, {"c", "b", 0.0}});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("non-positive length"), std::string::npos);
  }
}

TEST(Graph, Warnings) {
  EXPECT_EQ(interval().warnings().front(), "B=1: all statistics degenerate");
  EXPECT_TRUE(star3().warnings().empty());
  const auto loop = MetricGraph::build({"a", "b"}, {{"a", "a", 1.0}, {"a", "b", 2.0}});
  EXPECT_TRUE(loop.has_loops());
  EXPECT_EQ(loop.degree(0), 3u);
}

TEST(Kirchhoff, SingleBondIsSwap) {
  const auto g = interval();
  const auto s0 = kirchhoff_s0(g).matrix();
  EXPECT_EQ(s0(0, 0), Complex(0.0));
  EXPECT_EQ(s0(0, 1), Complex(1.0));
  EXPECT_EQ(s0(1, 0), Complex(1.0));
  EXPECT_EQ(s0(1, 1), Complex(0.0));
}

TEST(Kirchhoff, DegreeTwoVertexTransmitsFully) {
  const auto g = MetricGraph::build({"a", "m", "b"}, {{"a", "m", 1.0}, {"m", "b", 2.0}});
  const auto s0 = kirchhoff_s0(g).matrix();
  // into m along bond 0 (index 0), out of m along bond 1 (index 1) or back (index 3)
  EXPECT_DOUBLE_EQ(s0(1, 0).real(), 1.0);
  EXPECT_DOUBLE_EQ(s0(2, 0).real(), 0.0);
}

TEST(Kirchhoff, StarCentreCoefficients) {
  const auto g = star3();
  const auto s0 = kirchhoff_s0(g).matrix();
  // incoming to the centre: reverse bonds 3..5; outgoing from it: 0..2
  for (int in = 3; in < 6; ++in) {
    for (int out = 0; out < 3; ++out) {
      const double expected = out == in - 3 ? -1.0 / 3.0 : 2.0 / 3.0;
      EXPECT_NEAR(s0(out, in).real(), expected, 1e-15);
    }
  }
  // tips reflect
  for (int b = 0; b < 3; ++b) EXPECT_DOUBLE_EQ(s0(b + 3, b).real(), 1.0);
  EXPECT_TRUE(s0.imag().isZero());
}

TEST(Kirchhoff, UnitaryAndRowNormalised) {
  for (const auto& g : {interval(), star3(),
                        MetricGraph::build({"a", "b", "c"}, {{"a", "b", 1.0}, {"b", "c", 1.3}, {"c", "a", 0.7}, {"a", "b", 2.1}})}) {
    const auto s0 = kirchhoff_s0(g);
    const auto report = validate_unitary(g, s0.matrix());
    EXPECT_TRUE(report.passed);
    EXPECT_LE(report.max_deviation, 1e-12);
    for (Eigen::Index r = 0; r < s0.matrix().rows(); ++r) {
      EXPECT_NEAR(s0.matrix().row(r).squaredNorm(), 1.0, 1e-12);
      EXPECT_NEAR(s0.matrix().col(r).squaredNorm(), 1.0, 1e-12);
    }
  }
}

TEST(Kirchhoff, MultigraphReflectionUsesBondIdentity) {
  // two parallel bonds between a and b: reflection only back along the same bond
  const auto g = MetricGraph::build({"a", "b"}, {{"a", "b", 1.0}, {"a", "b", 1.5}});
  const auto s0 = kirchhoff_s0(g).matrix();
  EXPECT_DOUBLE_EQ(s0(2, 0).real(), 0.0);   // into b on bond 0, back on bond 0: 2/2 - 1
  EXPECT_DOUBLE_EQ(s0(3, 0).real(), 1.0);   // into b on bond 0, back on bond 1
}

TEST(Validation, PerturbationAndMask) {
  const auto g = star3();
  CMatrix m = kirchhoff_s0(g).matrix();
  m(0, 3) += 1e-3;
  const auto r = validate_unitary(g, m);
  EXPECT_FALSE(r.passed);
  // oracle: the defect of S S^dagger is first order in the perturbation
  const CMatrix defect = m * m.adjoint() - CMatrix::Identity(6, 6);
  EXPECT_NEAR(r.max_deviation, defect.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT(r.max_deviation, 5e-4);
  EXPECT_LT(r.max_deviation, 2e-3);

  CMatrix masked = kirchhoff_s0(g).matrix();
  masked(0, 0) = 0.1;  // bond 0 leaves c, incoming bond 0 arrives at t1
  const auto r2 = validate_unitary(g, masked);
  ASSERT_FALSE(r2.mask_violations.empty());
  EXPECT_EQ(r2.mask_violations.front().row, 0u);
  EXPECT_EQ(r2.mask_violations.front().col, 0u);
  EXPECT_FALSE(r2.passed);

  EXPECT_THROW(validate_unitary(g, CMatrix::Identity(4, 4)), ValidationError);
  EXPECT_THROW(BondScatteringMatrix::from_matrix(g, masked), ValidationError);
}

TEST(Evolution, ZeroAndScalarCases) {
  const auto g = interval();
  const auto s0 = kirchhoff_s0(g);
  EXPECT_EQ(evolution_operator(g, s0, 0.0), s0.matrix());
  const CMatrix u = evolution_operator(g, s0, 1.0);
  EXPECT_LT((u + s0.matrix()).cwiseAbs().maxCoeff(), 1e-15);

  // U(lambda + pi / L) = -U(lambda) for a single bond
  for (double lambda : {0.3, 1.7, 12.25}) {
    const CMatrix a = evolution_operator(g, s0, lambda);
    const CMatrix b = evolution_operator(g, s0, lambda + 1.0);
    EXPECT_LT((a + b).cwiseAbs().maxCoeff(), 1e-13);
  }

  const auto s = star3();
  const auto ss0 = kirchhoff_s0(s);
  EXPECT_TRUE(validate_unitary(s, evolution_operator(s, ss0, 2.3)).passed);
}

TEST(Observables, LengthAndProjector) {
  const auto g = MetricGraph::build({"a", "b", "c"}, {{"a", "b", 1.0}, {"b", "c", 2.0}});
  const auto l = length_observable(g).matrix();
  EXPECT_EQ(l.diagonal().real(), (RVector(4) << 1, 2, 1, 2).finished());
  EXPECT_DOUBLE_EQ(l.trace().real(), 2.0 * g.total_length());
  EXPECT_TRUE(l.imag().isZero());

  const auto p = bond_projector(g, 1).matrix();
  EXPECT_DOUBLE_EQ(p.trace().real(), 2.0);
  EXPECT_LT((p * p - p).norm(), 1e-15);
  EXPECT_THROW(bond_projector(g, 2), ValidationError);

  CMatrix not_hermitian = CMatrix::Zero(4, 4);
  not_hermitian(0, 1) = 1.0;
  EXPECT_THROW(Observable::from_matrix(g, not_hermitian), ValidationError);
}

TEST(GraphIo, ParsesKirchhoffAndMatrix) {
  const auto spec = parse_graph_spec(R"({"vertices": ["u", "v"], "bonds": [{"from": "u", "to": "v", "length": 2.5}]})");
  EXPECT_EQ(spec.conditions, "kirchhoff");
  EXPECT_DOUBLE_EQ(spec.graph.lengths()[0], 2.5);

  // Dirichlet ends: reflection -1 at both vertices
  const auto dir = parse_graph_spec(R"({"vertices": ["u", "v"], "bonds": [{"from": "u", "to": "v", "length": 1}],
    "conditions": {"matrix": [[0,0],[-1,0],[-1,0],[0,0]]}})");
  EXPECT_EQ(dir.conditions, "matrix");
  EXPECT_DOUBLE_EQ(dir.s0.matrix()(0, 1).real(), -1.0);

  EXPECT_THROW(parse_graph_spec("{"), ValidationError);
  EXPECT_THROW(parse_graph_spec(R"({"vertices": ["u"], "bonds": []})"), ValidationError);
  EXPECT_THROW(parse_graph_spec(R"({"vertices": ["u", "v"], "bonds": [{"from": "u", "to": "v", "length": 1}],
    "conditions": {"matrix": [[1,0],[0,0],[0,0],[1,0]]}})"),
               ValidationError);  // identity violates the connectivity mask
  EXPECT_THROW(parse_graph_spec(R"({"vertices": ["u", "v"], "bonds": [{"from": "u", "to": "v", "length": 1}],
    "conditions": "dirichlet"})"),
               ValidationError);
}

TEST(GraphIo, RoundTrip) {
  const auto g = star3();
  const auto again = parse_graph_spec(to_json(g));
  EXPECT_EQ(again.graph.vertices(), g.vertices());
  EXPECT_EQ(again.graph.lengths(), g.lengths());
}
