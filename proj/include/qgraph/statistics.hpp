#pragma once

#include "qgraph/estimate.hpp"
#include "qgraph/graph.hpp"
#include "qgraph/spectrum.hpp"
#include "qgraph/test_function.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace qgraph {

// Lbar (lambda_n - lambda_{n-r}) for n > r, multiplicities expanded so a
// degenerate level contributes zero spacings.
std::vector<double> normalized_spacings(const LambdaSpectrum& spectrum, const MetricGraph& graph, int r = 1);

// P_lambda[h] = (1/(N-r)) sum_{n>r} h(Lbar (lambda_n - lambda_{n-r})).
// diagnostic: change of the estimate over the last 10% of the spectrum.
// Throws ValidationError with fewer than r + 1 eigenvalues.
StatResult lambda_spacing_functional(const LambdaSpectrum& spectrum, const MetricGraph& graph, const TestFunction& h,
                                     int r = 1);

// Default quadrature step pi / (4 L_max).
double default_quadrature_step(const MetricGraph& graph);

// P_theta[h] = (1/Lambda) int_0^Lambda (1/2B) sum_j h(sigma_j(lambda)) dlambda
// by the composite midpoint rule. The estimate uses step/2; diagnostic is
// its difference from the step result. step = 0 selects the default; a step
// above pi / (4 L_max) is rejected.
StatResult theta_spacing_functional(const MetricGraph& graph, const BondScatteringMatrix& s0, const TestFunction& h,
                                    double capital_lambda, double step = 0.0, unsigned workers = 1);

struct EquivalenceRow {
  double delta = 0.0;
  RVector lengths;
  StatResult p_lambda;
  StatResult p_theta;
  double difference = 0.0;  // |P_lambda - P_theta|
  double stderr_ = 0.0;     // combined error of the difference
};

// For every delta: lengths l0 (1,...,1) + delta u on the topology of `graph`
// with Kirchhoff conditions, spectrum up to Lambda = n pi / total_length,
// then both spacing functionals. Throws ValidationError for delta = 0
// ("degenerate equal lengths"), repeated components in u, or a
// non-positive length.
std::vector<EquivalenceRow> spacing_equivalence_study(const MetricGraph& graph, double l0, const RVector& u,
                                                      const std::vector<double>& deltas, const TestFunction& h,
                                                      std::size_t n, double step = 0.0, unsigned workers = 1);

// (1/N) sum over fixed vectors phi of <phi|A|phi>^m / (<phi|L|phi> / Lbar).
// A degenerate level contributes each vector of a basis diagonalising the
// compressed L. diagnostic: change over the last 10% of levels.
StatResult evec_moment_spectral(const LambdaSpectrum& spectrum, const MetricGraph& graph, const Observable& a, int m);

// (1/Lambda) int_0^Lambda (1/2B) sum_j <psi_j|A|psi_j>^m dlambda, midpoint
// rule with step halving as in theta_spacing_functional. One result per m.
std::vector<StatResult> evec_moment_lambda_average(const MetricGraph& graph, const BondScatteringMatrix& s0,
                                                   const Observable& a, const std::vector<int>& moments,
                                                   double capital_lambda, double step = 0.0, unsigned workers = 1);

// Mean over D = e^{iX}, X uniform on [0, 2 pi)^B, of (1/2B) sum_j <psi_j(D)|A|psi_j(D)>^m
// where psi_j are the eigenvectors of D S0. Requires samples >= 1000.
std::vector<StatResult> evec_moment_ensemble(const MetricGraph& graph, const BondScatteringMatrix& s0,
                                             const Observable& a, const std::vector<int>& moments,
                                             std::size_t samples, std::uint64_t seed, unsigned workers = 1);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
  std::size_t total = 0;      // including values outside the range
};

Histogram histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi);

// Rows (bin_left, bin_right, count, density); density is normalised by the total count.
void write_histogram_csv(const Histogram& h, const std::filesystem::path& path, const std::string& header = {});

// Spacings sigma_j(lambda) on the midpoint grid of theta_spacing_functional, pooled.
std::vector<double> theta_spacing_samples(const MetricGraph& graph, const BondScatteringMatrix& s0,
                                          double capital_lambda, double step = 0.0);

}  // namespace qgraph
