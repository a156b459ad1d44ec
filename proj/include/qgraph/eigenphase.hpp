#pragma once

#include "qgraph/graph.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

namespace qgraph {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Phases closer than this are treated as one degenerate cluster.
inline constexpr double kDegeneracyGap = 1e-9;

// Eigen-decomposition of a unitary matrix at one point.
//
// phases[0] >= phases[1] >= ... > 0, every phase in (0, 2 pi]; an eigenvalue
// at exactly 1 is reported as 2 pi. vectors.col(j) belongs to phases[j].
// Inside a degenerate cluster the basis diagonalises the compressed length
// observable, so velocities are the derivatives of the analytic branches.
struct EigenphaseFrame {
  std::vector<double> phases;
  CMatrix vectors;
  std::vector<double> velocities;
};

// Eigenphases in (0, 2 pi], sorted decreasing. Eigenvalues only.
std::vector<double> eigenphases(const CMatrix& u);

// Throws ValidationError when U is not unitary to `unitary_tol`.
EigenphaseFrame eigenphase_frame(const CMatrix& u, const MetricGraph& graph, double unitary_tol = 1e-10);

// sigma_j = phase_j - phase_{j+1}, last one wraps around: phase_2B + 2 pi - phase_1.
std::vector<double> spacing_functions(const std::vector<double>& phases);
inline std::vector<double> spacing_functions(const EigenphaseFrame& frame) { return spacing_functions(frame.phases); }

// <psi_j | L | psi_j> for every frame vector.
std::vector<double> phase_velocity(const EigenphaseFrame& frame, const MetricGraph& graph);

// Continuous eigenphase branches theta_j(lambda) of e^{i lambda L} S0.
struct BranchTrack {
  std::vector<double> lambdas;
  std::vector<std::vector<double>> phases;  // [node][branch], unwrapped, increasing in lambda
  std::vector<CMatrix> vectors;             // per node (empty unless requested)
};

struct TrackOptions {
  double step = 0.0;          // base step; 0 selects pi / (4 L_max)
  double min_step = 1e-9;     // adaptive halving stops here
  double increment_tol = 1e-9;
  bool keep_vectors = false;
};

// Steps from lambda_start to lambda_end, matching branches between nodes by
// maximal eigenvector overlap (greedy, ties broken by phase proximity) and
// halving the step where the match is ambiguous. Throws ValidationError when
// the base step exceeds pi / L_max and NumericalError when branches cannot be
// matched (the message names the lambda).
BranchTrack track_branches(const MetricGraph& graph, const BondScatteringMatrix& s0, double lambda_start,
                           double lambda_end, const TrackOptions& options = {});

void write_branch_csv(const BranchTrack& track, const std::filesystem::path& path, const std::string& header = {});

// Counts surface crossings of the flow started at a base point.
//
// With U(t) = e^{i t L} e^{i x0} S0 the unwrapped eigenphases sum to
// sum_j theta_j(0) + 2 * total_length * t exactly, so the number of
// eigenphases that passed a multiple of 2 pi during (0, t] is
//   (2 total_length t - sum_j phat_j(t) + sum_j phat_j(0)) / (2 pi)
// with phat(t) in (0, 2 pi] and the base phases taken in [0, 2 pi). Base
// phases within `snap_tol` of 2 pi are snapped to 0: a crossing at t = 0 is
// never counted. The count is monotone in t, so roots are bracketed exactly.
class CrossingCounter {
 public:
  CrossingCounter(const MetricGraph& graph, const BondScatteringMatrix& s0, const RVector& x0,
                  double snap_tol = kDegeneracyGap);

  // Number of crossings in (0, t] counted with multiplicity; t >= 0.
  long count(double t) const;
  std::vector<double> phases_at(double t) const;
  CMatrix operator_at(double t) const;

  struct Crossing {
    double time = 0.0;
    int multiplicity = 0;
  };

  // All crossings in (begin, end], located to `time_tol`. Crossings closer
  // than `cluster_tol` are merged into one with summed multiplicity.
  std::vector<Crossing> crossings(double begin, double end, double time_tol = 1e-13,
                                  double cluster_tol = kDegeneracyGap) const;

  // Crossings from t = 0 until at least `n` have been collected (with multiplicity).
  std::vector<Crossing> first_crossings(std::size_t n) const;

  // First crossing strictly after t = 0.
  double next_crossing() const;

  double scan_step() const { return scan_step_; }

 private:
  struct Sample {
    long count;
    double pre;   // phase_1 - 2 pi  (<= 0): distance of the leading phase below 2 pi
    double post;  // smallest phase (> 0): how far the last crossing has moved on
  };
  Sample sample(double t) const;
  void isolate(double a, double b, Sample sa, Sample sb, double time_tol, std::vector<Crossing>& out) const;

  RVector lengths_;  // B
  CMatrix base_;     // e^{i x0} S0
  double twice_total_ = 0.0;
  double base_sum_ = 0.0;
  double scan_step_ = 0.0;
  double max_velocity_ = 0.0;
  double min_velocity_ = 0.0;
};

// d(x) = inf{t > 0 : phi_t(x) in Sigma}.
double next_crossing_time(const MetricGraph& graph, const BondScatteringMatrix& s0, const RVector& x);

}  // namespace qgraph
