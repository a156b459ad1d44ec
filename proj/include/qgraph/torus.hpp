#pragma once

#include "qgraph/eigenphase.hpp"
#include "qgraph/estimate.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/spectrum.hpp"
#include "qgraph/test_function.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace qgraph {

// Torus points are plain B-vectors; these helpers keep them in [0, 2 pi).
RVector wrap_torus(const RVector& x);

// x0 + t L mod 2 pi.
RVector flow_point(const RVector& x0, double t, const MetricGraph& graph);

// True iff the eigenphase of e^{ix} S0 nearest 2 pi lies within tol of it.
bool on_sigma(const RVector& x, const BondScatteringMatrix& s0, double tol = kDegeneracyGap);

// Crossing times of the flow from x0 with the surface in (0, t_max]: the
// spectrum of e^{i t L} e^{i x0} S0. At x0 = 0 this is solve_spectrum itself.
LambdaSpectrum crossings_from(const MetricGraph& graph, const BondScatteringMatrix& s0, const RVector& x0,
                              double t_max, unsigned workers = 1);

// Everything a surface function may look at, for a point x on the surface
// where `multiplicity` eigenphases sit at 2 pi.
struct SurfacePoint {
  RVector x;
  int multiplicity = 1;
  CMatrix fixed;                  // 2B x multiplicity, diagonalises the compressed L
  std::vector<double> velocities;  // <phi|L|phi> per fixed vector, increasing
  double gap = 0.0;               // 2 pi minus the largest phase off the surface
  double next_time = std::numeric_limits<double>::quiet_NaN();  // d(x), if known
  double mean_length = 0.0;
};

// Builds the surface data at x. Throws ValidationError when fewer than
// `multiplicity` eigenphases are within `tol` of 2 pi.
SurfacePoint surface_point(const MetricGraph& graph, const BondScatteringMatrix& s0, const RVector& x,
                           int multiplicity = 1, double next_time = std::numeric_limits<double>::quiet_NaN(),
                           double tol = 0.0);

// Bounded function on the surface. At a degenerate point it returns the sum
// over the branches meeting there.
class SurfaceFunction {
 public:
  using Evaluator = std::function<double(const SurfacePoint&)>;
  SurfaceFunction(std::string name, double bound, bool needs_next_time, Evaluator f);

  // Throws NumericalError when |value| exceeds the declared bound.
  double operator()(const SurfacePoint& p) const;
  const std::string& name() const { return name_; }
  double bound() const { return bound_; }
  bool needs_next_time() const { return needs_next_time_; }

 private:
  std::string name_;
  double bound_;
  bool needs_next_time_;
  Evaluator f_;
};

// Phi = 1 (the multiplicity at degenerate points).
SurfaceFunction surface_one(const MetricGraph& graph);
// Phi = sigma_1, the spacing below the phase at 2 pi.
SurfaceFunction surface_first_spacing(const MetricGraph& graph);
// Phi^sigma = h(sigma_1) / (left derivative of theta_1). In a cluster the
// spacing goes to the fastest branch, the others get h(0).
SurfaceFunction surface_phi_sigma(const MetricGraph& graph, const TestFunction& h);
// Phi^d = h(Lbar d(x)), plus h(0) for every extra branch of a cluster.
SurfaceFunction surface_phi_d(const MetricGraph& graph, const TestFunction& h);
// G(phi) = <phi|A|phi>^m / (<phi|L|phi> / Lbar), summed over a cluster.
SurfaceFunction surface_moment(const MetricGraph& graph, const Observable& a, int m);

// (1/N) sum_n Phi(phi_{t_n}(x0)) over the first N crossings, counted with
// multiplicity (a level straddling N is kept whole). The error is a batch
// means estimate; `diagnostic` is the change over the last 10% of crossings.
std::vector<StatResult> ergodic_average(const std::vector<SurfaceFunction>& phis, const RVector& x0,
                                        const MetricGraph& graph, const BondScatteringMatrix& s0, std::size_t n);

// Monte-Carlo estimate of (1/(dbar (2 pi)^B eps)) int Phi_eps with dbar = total_length / pi.
// Every sample x is flowed over [-eps/2, eps/2]; Phi is summed over the
// crossings found. Samples run in fixed chunks with per-chunk seeds and are
// reduced in chunk order, so the result does not depend on `workers`.
// Throws ValidationError unless 0 < eps < 2 pi / L_max and samples >= 1000.
std::vector<StatResult> thickened_average(const std::vector<SurfaceFunction>& phis, double eps,
                                          const MetricGraph& graph, const BondScatteringMatrix& s0,
                                          std::size_t samples, std::uint64_t seed, unsigned workers = 1);

// n points uniform on the torus from a seeded generator.
std::vector<RVector> random_torus_points(std::size_t n, std::size_t dim, std::uint64_t seed);

struct PropositionReport {
  std::vector<std::string> functions;
  std::vector<RVector> starts;
  std::vector<double> epsilons;
  std::vector<std::vector<StatResult>> ergodic;    // [function][start]
  std::vector<std::vector<StatResult>> thickened;  // [function][epsilon]

  double residual(std::size_t f, std::size_t start, std::size_t eps) const {
    return std::abs(ergodic[f][start].estimate - thickened[f][eps].estimate);
  }
};

PropositionReport proposition_residual(const std::vector<SurfaceFunction>& phis, const MetricGraph& graph,
                                       const BondScatteringMatrix& s0, const std::vector<RVector>& starts,
                                       const std::vector<double>& epsilons, std::size_t n, std::size_t samples,
                                       std::uint64_t seed, unsigned workers = 1);

// Rows (function, source, x0_id, epsilon, estimate, stderr, samples).
void write_proposition_csv(const PropositionReport& report, const std::filesystem::path& path,
                           const std::string& header = {});

}  // namespace qgraph
