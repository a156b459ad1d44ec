#pragma once

#include "qgraph/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace qgraph {

// Smallest root reported; lambda = 0 is never part of a spectrum.
inline constexpr double kZeroExclusion = 1e-8;

struct SpectralLevel {
  double lambda = 0.0;
  int multiplicity = 0;
  CMatrix basis;  // 2B x multiplicity, orthonormal fixed vectors of U(lambda); empty if not computed
};

// Positive roots of det[I - e^{i lambda L} e^{i x0} S0] = 0 up to lambda_max.
class LambdaSpectrum {
 public:
  LambdaSpectrum(std::vector<SpectralLevel> levels, double lambda_max, std::string fingerprint, bool has_vectors);

  const std::vector<SpectralLevel>& levels() const { return levels_; }
  // Eigenvalues repeated by multiplicity.
  std::vector<double> expanded() const;
  // Number of eigenvalues counted with multiplicity.
  std::size_t size() const { return size_; }
  double lambda_max() const { return lambda_max_; }
  const std::string& fingerprint() const { return fingerprint_; }
  bool has_vectors() const { return has_vectors_; }

  // First n eigenvalues (with multiplicity); a level straddling n is kept whole.
  LambdaSpectrum truncated(std::size_t n) const;

 private:
  std::vector<SpectralLevel> levels_;
  std::size_t size_ = 0;
  double lambda_max_ = 0.0;
  std::string fingerprint_;
  bool has_vectors_ = false;
};

struct SolveOptions {
  bool compute_vectors = true;
  unsigned workers = 1;
  double window = 0.0;        // lambda window per work item; 0 = automatic
  RVector base_point;         // torus point x0 (B entries); empty means the origin
};

// Locates every crossing of the monotone eigenphase branches through a
// multiple of 2 pi in (kZeroExclusion, lambda_max]; see CrossingCounter.
// Roots closer than 1e-9 form one level whose multiplicity is the number of
// branches crossing there. Throws ValidationError for lambda_max <= 0.
LambdaSpectrum solve_spectrum(const MetricGraph& graph, const BondScatteringMatrix& s0, double lambda_max,
                              const SolveOptions& options = {});

// Orthonormal basis of {c : U c = c}. With multiplicity 0 the dimension is
// the number of eigenphases within `tol` of 0 mod 2 pi. Throws
// ValidationError when U has no such eigenvalue (lambda not spectral) or the
// residual of a basis vector exceeds `tol`.
CMatrix fixed_point_basis(const CMatrix& u, int multiplicity = 0, double tol = 1e-8);

CMatrix eigenvector_at(const MetricGraph& graph, const BondScatteringMatrix& s0, double lambda, int multiplicity = 0,
                       double tol = 1e-8);

std::string graph_fingerprint(const MetricGraph& graph, const BondScatteringMatrix& s0);

struct WeylReport {
  std::size_t count = 0;       // N(Lambda) with multiplicity
  double capital_lambda = 0.0;
  double weyl_count = 0.0;     // total_length * Lambda / pi
  double ratio = 0.0;          // count / weyl_count
  double remainder = 0.0;      // count - weyl_count, displayed only
};

WeylReport weyl_check(const LambdaSpectrum& spectrum, const MetricGraph& graph);

struct WindowReport {
  std::size_t trials = 0;
  double long_window = 0.0;   // 2 pi / L_min
  double short_window = 0.0;  // 2 pi / L_max
  std::size_t min_long_count = 0;
  std::size_t max_short_count = 0;
  std::size_t long_violations = 0;   // windows with fewer than 2B points
  std::size_t short_violations = 0;  // windows with more than 2B points
  bool passed = false;
};

// Counts eigenvalues (with multiplicity) in random half-open windows
// (s, s + w]. Throws ValidationError when the spectrum is shorter than one
// long window.
WindowReport window_count_bounds(const LambdaSpectrum& spectrum, const MetricGraph& graph, std::size_t trials,
                                 std::uint64_t seed);

// Searches integer vectors k with |k_b| <= max_coeff (not all zero) such that
// |sum_b k_b L_b| <= tol * max L. Exhaustive for small B, otherwise limited
// to relations among at most three bonds. Returns the first relation found.
std::optional<std::vector<int>> find_integer_relation(const RVector& lengths, int max_coeff = 20, double tol = 1e-9);

void write_spectrum_csv(const LambdaSpectrum& spectrum, const std::filesystem::path& path,
                        const std::string& header = {});
void write_eigenvector_csv(const LambdaSpectrum& spectrum, const std::filesystem::path& path,
                           const std::string& header = {});

}  // namespace qgraph
