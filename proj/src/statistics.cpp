#include "qgraph/statistics.hpp"

#include "qgraph/eigenphase.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace qgraph {

namespace {

constexpr std::size_t kChunk = 1024;

std::mt19937_64 chunk_rng(std::uint64_t seed, std::size_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
  return std::mt19937_64(seq);
}

double checked_step(const MetricGraph& graph, double step) {
  const double limit = default_quadrature_step(graph);
  if (step == 0.0) return limit;
  if (!(step > 0.0)) throw ValidationError("quadrature step must be positive");
  if (step > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "quadrature step " << step << " too coarse (limit pi / (4 L_max) = " << limit << ")";
    throw ValidationError(msg.str());
  }
  return step;
}

// Midpoint values of `f` on n cells of (0, capital_lambda], each value a vector.
template <class F>
std::vector<std::vector<double>> midpoint_values(double capital_lambda, std::size_t cells, unsigned workers, F&& f) {
  std::vector<std::vector<double>> values(cells);
  const double h = capital_lambda / static_cast<double>(cells);
  const std::size_t n_chunks = (cells + kChunk - 1) / kChunk;
  for_each_chunk(n_chunks, workers, [&](std::size_t c) {
    const std::size_t hi = std::min(cells, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < hi; ++i) values[i] = f((static_cast<double>(i) + 0.5) * h);
  });
  return values;
}

// Runs the midpoint rule at `step` and `step / 2`; entry k of the integrand
// vector gives result k.
template <class F>
std::vector<StatResult> halved_quadrature(double capital_lambda, double step, unsigned workers, std::size_t n_out,
                                          F&& f) {
  if (!(capital_lambda > 0.0) || !std::isfinite(capital_lambda)) throw ValidationError("Lambda must be > 0");
  const auto coarse = static_cast<std::size_t>(std::ceil(capital_lambda / step));
  const auto a = midpoint_values(capital_lambda, coarse, workers, f);
  const auto b = midpoint_values(capital_lambda, 2 * coarse, workers, f);
  std::vector<StatResult> out;
  for (std::size_t k = 0; k < n_out; ++k) {
    std::vector<double> va(a.size());
    std::vector<double> vb(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) va[i] = a[i][k];
    for (std::size_t i = 0; i < b.size(); ++i) vb[i] = b[i][k];
    auto r = batch_mean(vb);
    r.diagnostic = std::abs(r.estimate - batch_mean(va).estimate);
    r.note = "midpoint rule; batch-means stderr; diagnostic = |I(step/2) - I(step)|";
    out.push_back(std::move(r));
  }
  return out;
}

void check_observable(const MetricGraph& graph, const Observable& a) {
  if (a.dim() != graph.dim()) throw ValidationError("observable dimension does not match graph");
}

// (1/2B) sum_j <psi_j|A|psi_j>^m for every requested m.
std::vector<double> frame_moments(const EigenphaseFrame& frame, const CMatrix& a, const std::vector<int>& moments) {
  const auto n = frame.vectors.cols();
  std::vector<double> expect(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j) {
    expect[static_cast<std::size_t>(j)] = frame.vectors.col(j).dot(a * frame.vectors.col(j)).real();
  }
  std::vector<double> out;
  for (int m : moments) {
    double s = 0.0;
    for (double e : expect) s += std::pow(e, m);
    out.push_back(s / static_cast<double>(n));
  }
  return out;
}

void check_moments(const std::vector<int>& moments) {
  if (moments.empty()) throw ValidationError("no moments requested");
  for (int m : moments) {
    if (m < 0) throw ValidationError("moment order must be >= 0");
  }
}

}  // namespace

double default_quadrature_step(const MetricGraph& graph) { return M_PI / (4.0 * graph.max_length()); }

std::vector<double> normalized_spacings(const LambdaSpectrum& spectrum, const MetricGraph& graph, int r) {
  if (r < 1) throw ValidationError("spacing order must be >= 1");
  const auto values = spectrum.expanded();
  const auto order = static_cast<std::size_t>(r);
  if (values.size() < order + 1) throw ValidationError("too few eigenvalues for the requested spacing order");
  const double lbar = graph.mean_length();
  std::vector<double> s;
  s.reserve(values.size() - order);
  for (std::size_t n = order; n < values.size(); ++n) s.push_back(lbar * (values[n] - values[n - order]));
  return s;
}

StatResult lambda_spacing_functional(const LambdaSpectrum& spectrum, const MetricGraph& graph, const TestFunction& h,
                                     int r) {
  const auto s = normalized_spacings(spectrum, graph, r);
  std::vector<double> hv(s.size());
  std::transform(s.begin(), s.end(), hv.begin(), [&](double x) { return h(x); });
  auto result = batch_mean(hv);
  const std::size_t head = std::max<std::size_t>(1, hv.size() * 9 / 10);
  result.diagnostic =
      result.estimate - batch_mean(std::vector<double>(hv.begin(), hv.begin() + static_cast<std::ptrdiff_t>(head))).estimate;
  result.note = "batch-means stderr; diagnostic = change over last 10% of spectrum";
  return result;
}

StatResult theta_spacing_functional(const MetricGraph& graph, const BondScatteringMatrix& s0, const TestFunction& h,
                                    double capital_lambda, double step, unsigned workers) {
  step = checked_step(graph, step);
  return halved_quadrature(capital_lambda, step, workers, 1, [&](double lambda) {
    const auto sigma = spacing_functions(eigenphases(evolution_operator(graph, s0, lambda)));
    double sum = 0.0;
    for (double s : sigma) sum += h(s);
    return std::vector<double>{sum / static_cast<double>(sigma.size())};
  }).front();
}

std::vector<double> theta_spacing_samples(const MetricGraph& graph, const BondScatteringMatrix& s0,
                                          double capital_lambda, double step) {
  step = checked_step(graph, step);
  const auto cells = static_cast<std::size_t>(std::ceil(capital_lambda / step));
  const double h = capital_lambda / static_cast<double>(cells);
  std::vector<double> out;
  for (std::size_t i = 0; i < cells; ++i) {
    for (double s : spacing_functions(eigenphases(evolution_operator(graph, s0, (static_cast<double>(i) + 0.5) * h)))) {
      out.push_back(s);
    }
  }
  return out;
}

std::vector<EquivalenceRow> spacing_equivalence_study(const MetricGraph& graph, double l0, const RVector& u,
                                                      const std::vector<double>& deltas, const TestFunction& h,
                                                      std::size_t n, double step, unsigned workers) {
  if (static_cast<std::size_t>(u.size()) != graph.num_bonds()) throw ValidationError("direction u must have B entries");
  if (std::set<double>(u.begin(), u.end()).size() != static_cast<std::size_t>(u.size())) {
    throw ValidationError("direction u must have distinct components");
  }
  if (!(l0 > 0.0)) throw ValidationError("base length must be positive");
  if (deltas.empty()) throw ValidationError("no deltas given");
  for (double d : deltas) {
    if (d == 0.0) throw ValidationError("degenerate equal lengths: delta = 0 is excluded");
  }
  if (n < 2) throw ValidationError("need at least two eigenvalues");

  std::vector<EquivalenceRow> rows;
  for (double delta : deltas) {
    EquivalenceRow row;
    row.delta = delta;
    row.lengths = RVector::Constant(u.size(), l0) + delta * u;
    const auto g = graph.with_lengths(row.lengths);
    const auto s0 = kirchhoff_s0(g);
    const double capital_lambda = static_cast<double>(n) * M_PI / g.total_length();
    SolveOptions options;
    options.compute_vectors = false;
    options.workers = workers;
    const auto spectrum = solve_spectrum(g, s0, capital_lambda, options);
    row.p_lambda = lambda_spacing_functional(spectrum, g, h, 1);
    row.p_theta = theta_spacing_functional(g, s0, h, capital_lambda, step, workers);
    row.difference = std::abs(row.p_lambda.estimate - row.p_theta.estimate);
    row.stderr_ = std::hypot(row.p_lambda.stderr_, row.p_theta.stderr_);
    rows.push_back(std::move(row));
  }
  return rows;
}

StatResult evec_moment_spectral(const LambdaSpectrum& spectrum, const MetricGraph& graph, const Observable& a, int m) {
  if (!spectrum.has_vectors()) throw ValidationError("spectrum has no eigenvectors");
  check_observable(graph, a);
  if (m < 0) throw ValidationError("moment order must be >= 0");
  const RVector len = graph.directed_lengths();
  const double lbar = graph.mean_length();
  std::vector<double> terms;
  for (const auto& level : spectrum.levels()) {
    if (level.basis.rows() != static_cast<Eigen::Index>(graph.dim())) {
      throw ValidationError("stored eigenvector dimension does not match graph");
    }
    CMatrix basis = level.basis;
    if (basis.cols() > 1) {
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(basis.adjoint() * len.asDiagonal() * basis);
      basis = basis * eig.eigenvectors();
    }
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
      const double an = basis.col(c).dot(a.matrix() * basis.col(c)).real();
      const double ln = (basis.col(c).cwiseAbs2().array() * len.array()).sum();
      terms.push_back(std::pow(an, m) / (ln / lbar));
    }
  }
  if (terms.empty()) throw ValidationError("empty spectrum");
  auto r = batch_mean(terms);
  const std::size_t head = std::max<std::size_t>(1, terms.size() * 9 / 10);
  r.diagnostic = r.estimate -
                 batch_mean(std::vector<double>(terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(head))).estimate;
  r.note = "batch-means stderr; diagnostic = change over last 10% of levels";
  return r;
}

std::vector<StatResult> evec_moment_lambda_average(const MetricGraph& graph, const BondScatteringMatrix& s0,
                                                   const Observable& a, const std::vector<int>& moments,
                                                   double capital_lambda, double step, unsigned workers) {
  check_observable(graph, a);
  check_moments(moments);
  step = checked_step(graph, step);
  return halved_quadrature(capital_lambda, step, workers, moments.size(), [&](double lambda) {
    return frame_moments(eigenphase_frame(evolution_operator(graph, s0, lambda), graph), a.matrix(), moments);
  });
}

std::vector<StatResult> evec_moment_ensemble(const MetricGraph& graph, const BondScatteringMatrix& s0,
                                             const Observable& a, const std::vector<int>& moments,
                                             std::size_t samples, std::uint64_t seed, unsigned workers) {
  check_observable(graph, a);
  check_moments(moments);
  if (samples < 1000) throw ValidationError("ensemble average needs at least 1000 samples");
  const std::size_t n_chunks = (samples + kChunk - 1) / kChunk;
  const std::size_t nm = moments.size();
  std::vector<std::vector<std::pair<double, double>>> sums(n_chunks, std::vector<std::pair<double, double>>(nm));
  for_each_chunk(n_chunks, workers, [&](std::size_t chunk) {
    auto rng = chunk_rng(seed, chunk);
    std::uniform_real_distribution<double> coord(0.0, kTwoPi);
    RVector x(static_cast<Eigen::Index>(graph.num_bonds()));
    const std::size_t count = std::min(kChunk, samples - chunk * kChunk);
    for (std::size_t s = 0; s < count; ++s) {
      for (Eigen::Index b = 0; b < x.size(); ++b) x[b] = coord(rng);
      const auto v = frame_moments(eigenphase_frame(phase_times_s0(x, s0), graph), a.matrix(), moments);
      for (std::size_t k = 0; k < nm; ++k) {
        sums[chunk][k].first += v[k];
        sums[chunk][k].second += v[k] * v[k];
      }
    }
  });
  const auto ns = static_cast<double>(samples);
  std::vector<StatResult> out(nm);
  for (std::size_t k = 0; k < nm; ++k) {
    double sum = 0.0;
    double sq = 0.0;
    for (const auto& chunk : sums) {
      sum += chunk[k].first;
      sq += chunk[k].second;
    }
    const double mean = sum / ns;
    const double var = std::max(0.0, (sq / ns - mean * mean) * ns / (ns - 1.0));
    out[k].estimate = mean;
    out[k].stderr_ = std::sqrt(var / ns);
    out[k].samples = samples;
    out[k].note = "Monte-Carlo stderr";
  }
  return out;
}

Histogram histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  if (bins == 0 || !(hi > lo)) throw ValidationError("histogram: need bins > 0 and hi > lo");
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) h.edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  h.total = values.size();
  for (double v : values) {
    if (v < lo || v >= hi) continue;
    auto k = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
    ++h.counts[std::min(k, bins - 1)];
  }
  return h;
}

void write_histogram_csv(const Histogram& h, const std::filesystem::path& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  if (!header.empty()) out << header << '\n';
  out << "bin_left,bin_right,count,density\n" << std::setprecision(17);
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const double width = h.edges[k + 1] - h.edges[k];
    const double density = h.total == 0 ? 0.0 : static_cast<double>(h.counts[k]) / (static_cast<double>(h.total) * width);
    out << h.edges[k] << ',' << h.edges[k + 1] << ',' << h.counts[k] << ',' << density << '\n';
  }
}

}  // namespace qgraph
