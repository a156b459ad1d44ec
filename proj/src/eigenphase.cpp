#include "qgraph/eigenphase.hpp"

#include "qgraph/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

namespace qgraph {

namespace {

// Maps arg z into (0, 2 pi]; a phase that is zero to rounding is reported as 2 pi.
double to_phase(const Complex& z) {
  const double a = std::arg(z);
  if (a <= 0.0) return a + kTwoPi;
  return a <= 8.0 * std::numeric_limits<double>::epsilon() ? kTwoPi : a;
}

// Indices sorted by decreasing phase.
std::vector<std::size_t> decreasing_order(const std::vector<double>& phases) {
  std::vector<std::size_t> order(phases.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return phases[a] > phases[b]; });
  return order;
}

// Groups of cyclically adjacent positions (in a decreasing phase list) that
// are closer than kDegeneracyGap. A cluster may wrap from the end to the start.
std::vector<std::vector<std::size_t>> degenerate_clusters(const std::vector<double>& sorted) {
  const std::size_t n = sorted.size();
  std::vector<std::vector<std::size_t>> clusters;
  if (n == 0) return clusters;
  auto gap_after = [&](std::size_t j) {
    return j + 1 < n ? sorted[j] - sorted[j + 1] : sorted[n - 1] + kTwoPi - sorted[0];
  };
  // start at a position preceded by a real gap so wrapping clusters stay whole
  std::size_t start = 0;
  bool found = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (gap_after((j + n - 1) % n) >= kDegeneracyGap) {
      start = j;
      found = true;
      break;
    }
  }
  if (!found) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    clusters.push_back(std::move(all));
    return clusters;
  }
  std::vector<std::size_t> current;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = (start + k) % n;
    current.push_back(j);
    if (gap_after(j) >= kDegeneracyGap) {
      clusters.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) clusters.push_back(std::move(current));
  return clusters;
}

}  // namespace

std::vector<double> eigenphases(const CMatrix& u) {
  Eigen::ComplexSchur<CMatrix> schur(u, false);
  if (schur.info() != Eigen::Success) throw NumericalError("eigenphases: Schur decomposition failed");
  const auto& t = schur.matrixT();
  std::vector<double> phases(static_cast<std::size_t>(t.rows()));
  for (Eigen::Index j = 0; j < t.rows(); ++j) phases[static_cast<std::size_t>(j)] = to_phase(t(j, j));
  std::sort(phases.begin(), phases.end(), std::greater<>());
  return phases;
}

EigenphaseFrame eigenphase_frame(const CMatrix& u, const MetricGraph& graph, double unitary_tol) {
  const auto n = u.rows();
  if (u.cols() != n || static_cast<std::size_t>(n) != graph.dim()) {
    throw ValidationError("eigenphase_frame: matrix dimension does not match graph");
  }
  const double defect = (u * u.adjoint() - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (defect > unitary_tol) {
    std::ostringstream msg;
    msg << "eigenphase_frame: matrix not unitary (deviation " << defect << ")";
    throw ValidationError(msg.str());
  }

  Eigen::ComplexSchur<CMatrix> schur(u, true);
  if (schur.info() != Eigen::Success) throw NumericalError("eigenphase_frame: Schur decomposition failed");
  const auto& t = schur.matrixT();
  const auto& q = schur.matrixU();

  std::vector<double> raw(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) raw[static_cast<std::size_t>(j)] = to_phase(t(j, j));
  const auto order = decreasing_order(raw);

  EigenphaseFrame frame;
  frame.phases.resize(order.size());
  frame.vectors.resize(n, n);
  for (std::size_t j = 0; j < order.size(); ++j) {
    frame.phases[j] = raw[order[j]];
    frame.vectors.col(static_cast<Eigen::Index>(j)) = q.col(static_cast<Eigen::Index>(order[j]));
  }

  const RVector len = graph.directed_lengths();
  for (const auto& cluster : degenerate_clusters(frame.phases)) {
    if (cluster.size() < 2) continue;
    const auto k = static_cast<Eigen::Index>(cluster.size());
    CMatrix basis(n, k);
    for (Eigen::Index c = 0; c < k; ++c) basis.col(c) = frame.vectors.col(static_cast<Eigen::Index>(cluster[c]));
    const CMatrix compressed = basis.adjoint() * len.asDiagonal() * basis;
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(compressed);
    const CMatrix rotated = basis * eig.eigenvectors();
    for (Eigen::Index c = 0; c < k; ++c) frame.vectors.col(static_cast<Eigen::Index>(cluster[c])) = rotated.col(c);
  }

  frame.velocities = phase_velocity(frame, graph);
  return frame;
}

std::vector<double> spacing_functions(const std::vector<double>& phases) {
  const std::size_t n = phases.size();
  std::vector<double> sigma(n);
  for (std::size_t j = 0; j + 1 < n; ++j) sigma[j] = phases[j] - phases[j + 1];
  if (n > 0) sigma[n - 1] = phases[n - 1] + kTwoPi - phases[0];
  return sigma;
}

std::vector<double> phase_velocity(const EigenphaseFrame& frame, const MetricGraph& graph) {
  const RVector len = graph.directed_lengths();
  std::vector<double> v(static_cast<std::size_t>(frame.vectors.cols()));
  for (Eigen::Index j = 0; j < frame.vectors.cols(); ++j) {
    v[static_cast<std::size_t>(j)] = (frame.vectors.col(j).cwiseAbs2().array() * len.array()).sum();
  }
  return v;
}

// ---------------------------------------------------------------------------
// Branch tracking

namespace {

struct Match {
  std::vector<std::size_t> target;  // previous branch -> index in new frame
  double min_score = 1.0;
};

Match match_branches(const EigenphaseFrame& prev, const std::vector<double>& predicted, const EigenphaseFrame& next) {
  const auto n = static_cast<std::size_t>(next.phases.size());
  const CMatrix overlap = prev.vectors.adjoint() * next.vectors;

  // Score against the whole degenerate cluster of the candidate, so that the
  // arbitrary basis inside a cluster does not make the match look ambiguous.
  std::vector<std::size_t> cluster_of(n);
  const auto clusters = degenerate_clusters(next.phases);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (auto j : clusters[c]) cluster_of[j] = c;
  }
  std::vector<std::vector<double>> score(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (auto k : clusters[cluster_of[j]]) s += std::norm(overlap(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
      score[i][j] = std::sqrt(s);
    }
  }

  struct Candidate {
    long long score;  // quantised so equal cluster scores tie exactly
    double distance;
    std::size_t i, j;
  };
  std::vector<Candidate> cands;
  cands.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = std::abs(std::remainder(next.phases[j] - predicted[i], kTwoPi));
      cands.push_back({std::llround(score[i][j] * 1e8), d, i, j});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.distance < b.distance;
  });

  Match m;
  m.target.assign(n, n);
  std::vector<bool> used(n, false);
  std::size_t assigned = 0;
  for (const auto& c : cands) {
    if (assigned == n) break;
    if (m.target[c.i] != n || used[c.j]) continue;
    m.target[c.i] = c.j;
    used[c.j] = true;
    m.min_score = std::min(m.min_score, static_cast<double>(c.score) * 1e-8);
    ++assigned;
  }
  return m;
}

}  // namespace

BranchTrack track_branches(const MetricGraph& graph, const BondScatteringMatrix& s0, double lambda_start,
                           double lambda_end, const TrackOptions& options) {
  if (!(lambda_start < lambda_end)) throw ValidationError("track_branches: need lambda_start < lambda_end");
  const double lmin = graph.min_length();
  const double lmax = graph.max_length();
  const double limit = M_PI / lmax;
  const double base = options.step > 0.0 ? options.step : limit / 4.0;
  if (base > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "track_branches: step " << base << " exceeds pi/L_max = " << limit;
    throw ValidationError(msg.str());
  }

  const auto n = graph.dim();
  BranchTrack track;
  auto frame = eigenphase_frame(evolution_operator(graph, s0, lambda_start), graph);
  track.lambdas.push_back(lambda_start);
  track.phases.push_back(frame.phases);
  if (options.keep_vectors) track.vectors.push_back(frame.vectors);

  std::vector<double> unwrapped = frame.phases;
  double lambda = lambda_start;
  double step = base;
  while (lambda < lambda_end) {
    const double h = std::min(step, lambda_end - lambda);
    const double next_lambda = lambda_end - lambda <= step ? lambda_end : lambda + h;
    auto next = eigenphase_frame(evolution_operator(graph, s0, next_lambda), graph);

    std::vector<double> predicted(n);
    for (std::size_t i = 0; i < n; ++i) predicted[i] = frame.phases[i] + frame.velocities[i] * h;
    const auto match = match_branches(frame, predicted, next);

    bool ok = match.min_score >= 0.5;
    std::vector<double> increments(n);
    for (std::size_t i = 0; ok && i < n; ++i) {
      // h <= pi / L_max keeps every true increment inside [0, pi]
      const double inc = std::remainder(next.phases[match.target[i]] - frame.phases[i], kTwoPi);
      increments[i] = inc;
      ok = inc >= lmin * h - options.increment_tol && inc <= lmax * h + options.increment_tol;
    }
    if (!ok) {
      if (h / 2.0 < options.min_step) {
        std::ostringstream msg;
        msg << std::setprecision(17) << "track_branches: failed to match branches at lambda = " << lambda;
        throw NumericalError(msg.str());
      }
      step = h / 2.0;
      continue;
    }

    // reorder the new frame into branch order
    EigenphaseFrame ordered;
    ordered.phases.resize(n);
    ordered.velocities.resize(n);
    ordered.vectors.resize(next.vectors.rows(), next.vectors.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = match.target[i];
      ordered.phases[i] = next.phases[j];
      ordered.velocities[i] = next.velocities[j];
      ordered.vectors.col(static_cast<Eigen::Index>(i)) = next.vectors.col(static_cast<Eigen::Index>(j));
      unwrapped[i] += increments[i];
    }
    frame = std::move(ordered);
    lambda = next_lambda;
    track.lambdas.push_back(lambda);
    track.phases.push_back(unwrapped);
    if (options.keep_vectors) track.vectors.push_back(frame.vectors);
    step = std::min(base, step * 2.0);
  }
  return track;
}

void write_branch_csv(const BranchTrack& track, const std::filesystem::path& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  if (!header.empty()) out << header << '\n';
  out << "lambda";
  const std::size_t n = track.phases.empty() ? 0 : track.phases.front().size();
  for (std::size_t j = 1; j <= n; ++j) out << ",theta_" << j;
  out << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < track.lambdas.size(); ++k) {
    out << track.lambdas[k];
    for (double p : track.phases[k]) out << ',' << p;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Crossing counter

CrossingCounter::CrossingCounter(const MetricGraph& graph, const BondScatteringMatrix& s0, const RVector& x0,
                                 double snap_tol)
    : lengths_(graph.lengths()), base_(phase_times_s0(x0, s0)), twice_total_(2.0 * graph.total_length()) {
  if (static_cast<std::size_t>(x0.size()) != graph.num_bonds()) {
    throw ValidationError("CrossingCounter: base point must have B coordinates");
  }
  for (double p : eigenphases(base_)) {
    // base phases live in [0, 2 pi); anything within snap_tol of the surface
    // counts as sitting on it
    base_sum_ += (p > kTwoPi - snap_tol || p < snap_tol) ? 0.0 : p;
  }
  scan_step_ = M_PI / graph.total_length();
  max_velocity_ = graph.max_length();
  min_velocity_ = graph.min_length();
}

CMatrix CrossingCounter::operator_at(double t) const {
  CMatrix u = base_;
  const auto b = lengths_.size();
  for (Eigen::Index k = 0; k < b; ++k) {
    const Complex z = std::polar(1.0, t * lengths_[k]);
    u.row(k) *= z;
    u.row(k + b) *= z;
  }
  return u;
}

std::vector<double> CrossingCounter::phases_at(double t) const { return eigenphases(operator_at(t)); }

CrossingCounter::Sample CrossingCounter::sample(double t) const {
  const auto phases = phases_at(t);
  const double sum = std::accumulate(phases.begin(), phases.end(), 0.0);
  const double raw = (twice_total_ * t - sum + base_sum_) / kTwoPi;
  const double rounded = std::round(raw);
  if (std::abs(raw - rounded) > 1e-6) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "crossing count is not integral at t = " << t << " (" << raw << ")";
    throw NumericalError(msg.str());
  }
  return {std::max(0L, static_cast<long>(rounded)), phases.front() - kTwoPi, phases.back()};
}

long CrossingCounter::count(double t) const { return sample(t).count; }

void CrossingCounter::isolate(double a, double b, Sample sa, Sample sb, double time_tol,
                              std::vector<Crossing>& out) const {
  const long jump = sb.count - sa.count;
  if (jump <= 0) return;
  // phases carry an absolute error growing like eps * t * L
  const double tol = std::max(time_tol, 8.0 * std::numeric_limits<double>::epsilon() * b * max_velocity_);

  if (jump > 1) {
    if (b - a <= tol) {
      out.push_back({0.5 * (a + b), static_cast<int>(jump)});
      return;
    }
    const double m = 0.5 * (a + b);
    const auto sm = sample(m);
    isolate(a, m, sa, sm, time_tol, out);
    isolate(m, b, sm, sb, time_tol, out);
    return;
  }

  // Single crossing: Illinois false position on the signed distance of the
  // crossing phase from 2 pi, with the bracket maintained by the exact count.
  double fa = sa.pre;
  double fb = sb.post;
  int side = 0;
  double width_before = b - a;
  for (int iter = 0; iter < 200 && b - a > tol; ++iter) {
    double t;
    const bool stalled = iter > 0 && iter % 3 == 0 && (b - a) > 0.5 * width_before;
    if (iter % 3 == 0) width_before = b - a;
    if (!stalled && fa < 0.0 && fb > 0.0) {
      t = a - fa * (b - a) / (fb - fa);
      if (!(t > a && t < b)) t = 0.5 * (a + b);
    } else {
      t = 0.5 * (a + b);
    }
    const auto s = sample(t);
    // every branch moves at least min_velocity_, so |F| bounds the time error
    const double f = s.count == sa.count ? s.pre : s.post;
    if (std::abs(f) <= min_velocity_ * tol) {
      out.push_back({t, 1});
      return;
    }
    if (s.count == sa.count) {
      a = t;
      fa = s.pre;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      b = t;
      fb = s.post;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
  }
  out.push_back({0.5 * (a + b), 1});
}

std::vector<CrossingCounter::Crossing> CrossingCounter::crossings(double begin, double end, double time_tol,
                                                                  double cluster_tol) const {
  if (begin < 0.0) throw ValidationError("crossings: begin must be >= 0");
  std::vector<Crossing> raw;
  if (!(end > begin)) return raw;
  double a = begin;
  auto sa = sample(a);
  while (a < end) {
    const double b = std::min(end, a + scan_step_);
    const auto sb = sample(b);
    isolate(a, b, sa, sb, time_tol, raw);
    a = b;
    sa = sb;
  }
  std::vector<Crossing> merged;
  for (const auto& c : raw) {
    if (!merged.empty() && c.time - merged.back().time <= cluster_tol) {
      auto& last = merged.back();
      last.time = (last.time * last.multiplicity + c.time * c.multiplicity) / (last.multiplicity + c.multiplicity);
      last.multiplicity += c.multiplicity;
    } else {
      merged.push_back(c);
    }
  }
  return merged;
}

std::vector<CrossingCounter::Crossing> CrossingCounter::first_crossings(std::size_t n) const {
  if (n == 0) return {};
  const auto target = static_cast<long>(n);
  double t = static_cast<double>(n + 1) * scan_step_;
  while (count(t) < target) t *= 1.25;
  auto all = crossings(0.0, t);
  std::vector<Crossing> out;
  long total = 0;
  for (const auto& c : all) {
    if (total >= target) break;
    out.push_back(c);
    total += c.multiplicity;
  }
  return out;
}

double CrossingCounter::next_crossing() const {
  double a = 0.0;
  auto sa = sample(a);
  for (int guard = 0; guard < 1000000; ++guard) {
    const double b = a + scan_step_;
    const auto sb = sample(b);
    if (sb.count > sa.count) {
      std::vector<Crossing> found;
      isolate(a, b, sa, sb, 1e-13, found);
      return found.front().time;
    }
    a = b;
    sa = sb;
  }
  throw NumericalError("next_crossing: no crossing found");
}

double next_crossing_time(const MetricGraph& graph, const BondScatteringMatrix& s0, const RVector& x) {
  return CrossingCounter(graph, s0, x).next_crossing();
}

}  // namespace qgraph
