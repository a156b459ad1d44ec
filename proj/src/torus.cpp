#include "qgraph/torus.hpp"

#include "qgraph/errors.hpp"
#include "qgraph/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace qgraph {

RVector wrap_torus(const RVector& x) {
  RVector y(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    double v = std::fmod(x[k], kTwoPi);
    if (v < 0.0) v += kTwoPi;
    if (v >= kTwoPi) v = 0.0;
    y[k] = v;
  }
  return y;
}

RVector flow_point(const RVector& x0, double t, const MetricGraph& graph) {
  if (static_cast<std::size_t>(x0.size()) != graph.num_bonds()) {
    throw ValidationError("flow_point: torus point must have B coordinates");
  }
  return wrap_torus(x0 + t * graph.lengths());
}

bool on_sigma(const RVector& x, const BondScatteringMatrix& s0, double tol) {
  double nearest = kTwoPi;
  for (double p : eigenphases(phase_times_s0(x, s0))) nearest = std::min(nearest, std::abs(std::remainder(p, kTwoPi)));
  return nearest <= tol;
}

LambdaSpectrum crossings_from(const MetricGraph& graph, const BondScatteringMatrix& s0, const RVector& x0,
                              double t_max, unsigned workers) {
  SolveOptions options;
  options.compute_vectors = false;
  options.workers = workers;
  options.base_point = x0;
  return solve_spectrum(graph, s0, t_max, options);
}

SurfacePoint surface_point(const MetricGraph& graph, const BondScatteringMatrix& s0, const RVector& x,
                           int multiplicity, double next_time, double tol) {
  if (multiplicity < 1) throw ValidationError("surface_point: multiplicity must be >= 1");
  const auto frame = eigenphase_frame(phase_times_s0(x, s0), graph);
  const auto n = frame.phases.size();
  const auto k = static_cast<std::size_t>(multiplicity);
  if (k > n) throw ValidationError("surface_point: multiplicity exceeds dimension");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto distance = [&](std::size_t j) { return std::abs(std::remainder(frame.phases[j], kTwoPi)); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return distance(a) < distance(b); });

  const double cluster_tol = tol > 0.0 ? tol : 2.0 * kDegeneracyGap * std::max(1.0, graph.max_length());
  if (distance(order[0]) > kDegeneracyGap || distance(order[k - 1]) > cluster_tol) {
    std::ostringstream msg;
    msg << "point is not on the surface: phase distance from 2 pi is " << distance(order[k - 1]);
    throw ValidationError(msg.str());
  }

  SurfacePoint p;
  p.x = x;
  p.multiplicity = multiplicity;
  p.next_time = next_time;
  p.mean_length = graph.mean_length();

  CMatrix basis(frame.vectors.rows(), multiplicity);
  for (std::size_t c = 0; c < k; ++c) basis.col(static_cast<Eigen::Index>(c)) = frame.vectors.col(static_cast<Eigen::Index>(order[c]));
  const RVector len = graph.directed_lengths();
  if (k > 1) {
    // analytic branches through the cluster; velocities come out increasing
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(basis.adjoint() * len.asDiagonal() * basis);
    basis = basis * eig.eigenvectors();
  }
  p.fixed = basis;
  for (Eigen::Index c = 0; c < basis.cols(); ++c) {
    p.velocities.push_back((basis.col(c).cwiseAbs2().array() * len.array()).sum());
  }

  double highest = 0.0;
  for (std::size_t c = k; c < n; ++c) highest = std::max(highest, frame.phases[order[c]]);
  p.gap = k < n ? kTwoPi - highest : kTwoPi;
  return p;
}

SurfaceFunction::SurfaceFunction(std::string name, double bound, bool needs_next_time, Evaluator f)
    : name_(std::move(name)), bound_(bound), needs_next_time_(needs_next_time), f_(std::move(f)) {}

double SurfaceFunction::operator()(const SurfacePoint& p) const {
  if (needs_next_time_ && !std::isfinite(p.next_time)) {
    throw ValidationError("surface function " + name_ + " needs the next crossing time");
  }
  const double v = f_(p);
  if (!std::isfinite(v) || std::abs(v) > bound_) {
    std::ostringstream msg;
    msg << "surface function " << name_ << " value " << v << " exceeds its bound " << bound_;
    throw NumericalError(msg.str());
  }
  return v;
}

SurfaceFunction surface_one(const MetricGraph& graph) {
  return {"one", static_cast<double>(graph.dim()), false,
          [](const SurfacePoint& p) { return static_cast<double>(p.multiplicity); }};
}

SurfaceFunction surface_first_spacing(const MetricGraph&) {
  return {"sigma1", kTwoPi, false, [](const SurfacePoint& p) { return p.gap; }};
}

SurfaceFunction surface_phi_sigma(const MetricGraph& graph, const TestFunction& h) {
  const double bound = static_cast<double>(graph.dim()) * h.bound() / graph.min_length();
  return {"phi_sigma[" + h.name() + "]", bound, false, [h](const SurfacePoint& p) {
            // fastest branch is the lowest just before the crossing, so it owns the gap
            double v = h(p.gap) / p.velocities.back();
            for (std::size_t c = 0; c + 1 < p.velocities.size(); ++c) v += h(0.0) / p.velocities[c];
            return v;
          }};
}

SurfaceFunction surface_phi_d(const MetricGraph& graph, const TestFunction& h) {
  const double bound = static_cast<double>(graph.dim()) * h.bound();
  return {"phi_d[" + h.name() + "]", bound, true, [h](const SurfacePoint& p) {
            return h(p.mean_length * p.next_time) + (p.multiplicity - 1) * h(0.0);
          }};
}

SurfaceFunction surface_moment(const MetricGraph& graph, const Observable& a, int m) {
  if (m < 0) throw ValidationError("surface_moment: m must be >= 0");
  if (a.dim() != graph.dim()) throw ValidationError("surface_moment: observable dimension does not match graph");
  const double norm = a.matrix().cwiseAbs().rowwise().sum().maxCoeff();
  const double bound = static_cast<double>(graph.dim()) * std::pow(norm, m) * graph.mean_length() / graph.min_length();
  const CMatrix am = a.matrix();
  std::ostringstream name;
  name << "moment[m=" << m << "]";
  return {name.str(), bound * (1.0 + 1e-9), false, [am, m](const SurfacePoint& p) {
            double v = 0.0;
            for (Eigen::Index c = 0; c < p.fixed.cols(); ++c) {
              const double av = p.fixed.col(c).dot(am * p.fixed.col(c)).real();
              v += std::pow(av, m) * p.mean_length / p.velocities[static_cast<std::size_t>(c)];
            }
            return v;
          }};
}

namespace {

bool any_needs_next(const std::vector<SurfaceFunction>& phis) {
  return std::any_of(phis.begin(), phis.end(), [](const SurfaceFunction& f) { return f.needs_next_time(); });
}

}  // namespace

std::vector<StatResult> ergodic_average(const std::vector<SurfaceFunction>& phis, const RVector& x0,
                                        const MetricGraph& graph, const BondScatteringMatrix& s0, std::size_t n) {
  if (n == 0) throw ValidationError("ergodic_average: need at least one crossing");
  const CrossingCounter counter(graph, s0, x0);
  // one extra level supplies d(x) at the last kept crossing
  auto levels = counter.first_crossings(n + static_cast<std::size_t>(graph.dim()) + 1);
  std::size_t kept = 0;
  long total = 0;
  while (kept < levels.size() && total < static_cast<long>(n)) total += levels[kept++].multiplicity;
  if (kept == levels.size()) throw NumericalError("ergodic_average: crossing list too short");

  std::vector<std::vector<double>> values(phis.size(), std::vector<double>(kept));
  std::vector<double> weights(kept);
  for (std::size_t l = 0; l < kept; ++l) {
    const double t = levels[l].time;
    const auto p = surface_point(graph, s0, flow_point(x0, t, graph), levels[l].multiplicity,
                                 levels[l + 1].time - t);
    weights[l] = levels[l].multiplicity;
    for (std::size_t f = 0; f < phis.size(); ++f) values[f][l] = phis[f](p);
  }

  std::vector<StatResult> out;
  const std::size_t head = std::max<std::size_t>(1, kept * 9 / 10);
  for (std::size_t f = 0; f < phis.size(); ++f) {
    auto r = batch_ratio(values[f], weights);
    const std::vector<double> hv(values[f].begin(), values[f].begin() + static_cast<std::ptrdiff_t>(head));
    const std::vector<double> hw(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(head));
    r.diagnostic = r.estimate - batch_ratio(hv, hw).estimate;
    r.note = "batch-means stderr; diagnostic = change over last 10% of crossings";
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RVector> random_torus_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x70u};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> coord(0.0, kTwoPi);
  std::vector<RVector> out;
  for (std::size_t k = 0; k < n; ++k) {
    RVector x(static_cast<Eigen::Index>(dim));
    for (Eigen::Index b = 0; b < x.size(); ++b) x[b] = coord(rng);
    out.push_back(x);
  }
  return out;
}

std::vector<StatResult> thickened_average(const std::vector<SurfaceFunction>& phis, double eps,
                                          const MetricGraph& graph, const BondScatteringMatrix& s0,
                                          std::size_t samples, std::uint64_t seed, unsigned workers) {
  if (!(eps > 0.0) || !(eps < kTwoPi / graph.max_length())) {
    throw ValidationError("thickened_average: epsilon must lie in (0, 2 pi / L_max)");
  }
  if (samples < 1000) throw ValidationError("thickened_average: need at least 1000 samples");

  constexpr std::size_t kChunk = 1024;
  const std::size_t n_chunks = (samples + kChunk - 1) / kChunk;
  const std::size_t nf = phis.size();
  const bool need_next = any_needs_next(phis);
  const auto dim = graph.num_bonds();
  const RVector half = 0.5 * eps * graph.lengths();
  // sums[chunk][f] = {sum, sum of squares}
  std::vector<std::vector<std::pair<double, double>>> sums(n_chunks, std::vector<std::pair<double, double>>(nf));

  for_each_chunk(n_chunks, workers, [&](std::size_t chunk) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> coord(0.0, kTwoPi);
    const std::size_t count = std::min(kChunk, samples - chunk * kChunk);
    std::vector<double> phi_eps(nf);
    RVector x(static_cast<Eigen::Index>(dim));
    for (std::size_t s = 0; s < count; ++s) {
      for (Eigen::Index b = 0; b < x.size(); ++b) x[b] = coord(rng);
      const RVector start = wrap_torus(x - half);
      const CrossingCounter counter(graph, s0, start);
      std::fill(phi_eps.begin(), phi_eps.end(), 0.0);
      for (const auto& c : counter.crossings(0.0, eps)) {
        const RVector xi = flow_point(start, c.time, graph);
        const double d = need_next ? next_crossing_time(graph, s0, xi) : std::numeric_limits<double>::quiet_NaN();
        const auto p = surface_point(graph, s0, xi, c.multiplicity, d);
        for (std::size_t f = 0; f < nf; ++f) phi_eps[f] += phis[f](p);
      }
      for (std::size_t f = 0; f < nf; ++f) {
        sums[chunk][f].first += phi_eps[f];
        sums[chunk][f].second += phi_eps[f] * phi_eps[f];
      }
    }
  });

  const double dbar = graph.total_length() / M_PI;
  const double scale = 1.0 / (dbar * eps);
  const auto ns = static_cast<double>(samples);
  std::vector<StatResult> out(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
      sum += sums[chunk][f].first;
      sq += sums[chunk][f].second;
    }
    const double mean = sum / ns;
    const double var = std::max(0.0, (sq / ns - mean * mean) * ns / (ns - 1.0));
    out[f].estimate = scale * mean;
    out[f].stderr_ = scale * std::sqrt(var / ns);
    out[f].samples = samples;
    out[f].note = "Monte-Carlo stderr";
  }
  return out;
}

PropositionReport proposition_residual(const std::vector<SurfaceFunction>& phis, const MetricGraph& graph,
                                       const BondScatteringMatrix& s0, const std::vector<RVector>& starts,
                                       const std::vector<double>& epsilons, std::size_t n, std::size_t samples,
                                       std::uint64_t seed, unsigned workers) {
  if (starts.empty() || epsilons.empty()) throw ValidationError("proposition_residual: need starts and epsilons");
  PropositionReport r;
  for (const auto& f : phis) r.functions.push_back(f.name());
  r.starts = starts;
  r.epsilons = epsilons;
  r.ergodic.assign(phis.size(), std::vector<StatResult>(starts.size()));
  r.thickened.assign(phis.size(), std::vector<StatResult>(epsilons.size()));

  std::vector<std::vector<StatResult>> erg(starts.size());
  for_each_chunk(starts.size(), workers, [&](std::size_t i) { erg[i] = ergodic_average(phis, starts[i], graph, s0, n); });
  for (std::size_t i = 0; i < starts.size(); ++i) {
    for (std::size_t f = 0; f < phis.size(); ++f) r.ergodic[f][i] = erg[i][f];
  }
  for (std::size_t j = 0; j < epsilons.size(); ++j) {
    const auto th = thickened_average(phis, epsilons[j], graph, s0, samples, seed, workers);
    for (std::size_t f = 0; f < phis.size(); ++f) r.thickened[f][j] = th[f];
  }
  return r;
}

void write_proposition_csv(const PropositionReport& report, const std::filesystem::path& path,
                           const std::string& header) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  if (!header.empty()) out << header << '\n';
  out << "function,source,x0_id,epsilon,estimate,stderr,samples\n" << std::setprecision(17);
  for (std::size_t f = 0; f < report.functions.size(); ++f) {
    for (std::size_t i = 0; i < report.starts.size(); ++i) {
      const auto& e = report.ergodic[f][i];
      out << '"' << report.functions[f] << "\",ergodic," << i << ",," << e.estimate << ',' << e.stderr_ << ',' << e.samples
          << '\n';
    }
    for (std::size_t j = 0; j < report.epsilons.size(); ++j) {
      const auto& t = report.thickened[f][j];
      out << '"' << report.functions[f] << "\",thickened,," << report.epsilons[j] << ',' << t.estimate << ',' << t.stderr_
          << ',' << t.samples << '\n';
    }
  }
}

}  // namespace qgraph
