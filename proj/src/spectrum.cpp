#include "qgraph/spectrum.hpp"

#include "qgraph/eigenphase.hpp"
#include "qgraph/errors.hpp"
#include "qgraph/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace qgraph {

LambdaSpectrum::LambdaSpectrum(std::vector<SpectralLevel> levels, double lambda_max, std::string fingerprint,
                               bool has_vectors)
    : levels_(std::move(levels)), lambda_max_(lambda_max), fingerprint_(std::move(fingerprint)),
      has_vectors_(has_vectors) {
  for (const auto& l : levels_) size_ += static_cast<std::size_t>(l.multiplicity);
}

std::vector<double> LambdaSpectrum::expanded() const {
  std::vector<double> out;
  out.reserve(size_);
  for (const auto& l : levels_) out.insert(out.end(), static_cast<std::size_t>(l.multiplicity), l.lambda);
  return out;
}

LambdaSpectrum LambdaSpectrum::truncated(std::size_t n) const {
  std::vector<SpectralLevel> kept;
  std::size_t total = 0;
  for (const auto& l : levels_) {
    if (total >= n) break;
    kept.push_back(l);
    total += static_cast<std::size_t>(l.multiplicity);
  }
  const double top = kept.empty() ? 0.0 : kept.back().lambda;
  return {std::move(kept), top, fingerprint_, has_vectors_};
}

std::string graph_fingerprint(const MetricGraph& graph, const BondScatteringMatrix& s0) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int k = 0; k < 8; ++k) {
      h ^= (bits >> (8 * k)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& b : graph.bonds()) {
    mix(static_cast<double>(b.from));
    mix(static_cast<double>(b.to));
    mix(b.length);
  }
  for (Eigen::Index k = 0; k < s0.matrix().size(); ++k) {
    mix(s0.matrix().data()[k].real());
    mix(s0.matrix().data()[k].imag());
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

CMatrix fixed_point_basis(const CMatrix& u, int multiplicity, double tol) {
  Eigen::ComplexSchur<CMatrix> schur(u, true);
  if (schur.info() != Eigen::Success) throw NumericalError("fixed_point_basis: Schur decomposition failed");
  const auto& t = schur.matrixT();
  const auto n = t.rows();

  std::vector<std::pair<double, Eigen::Index>> distance;
  for (Eigen::Index j = 0; j < n; ++j) distance.emplace_back(std::abs(std::arg(t(j, j))), j);
  std::sort(distance.begin(), distance.end());

  int dim = multiplicity;
  if (dim <= 0) {
    dim = static_cast<int>(std::count_if(distance.begin(), distance.end(), [&](const auto& d) { return d.first <= tol; }));
  }
  if (dim == 0 || distance.front().first > tol) {
    std::ostringstream msg;
    msg << "not a spectral point: nearest eigenphase is " << distance.front().first << " from 0";
    throw ValidationError(msg.str());
  }
  if (dim > n) throw ValidationError("fixed_point_basis: multiplicity exceeds dimension");

  CMatrix basis(n, dim);
  for (int k = 0; k < dim; ++k) basis.col(k) = schur.matrixU().col(distance[static_cast<std::size_t>(k)].second);
  for (int k = 0; k < dim; ++k) {
    const double residual = (u * basis.col(k) - basis.col(k)).norm();
    if (residual > tol) {
      std::ostringstream msg;
      msg << "fixed vector residual " << residual << " exceeds " << tol;
      throw ValidationError(msg.str());
    }
  }
  return basis;
}

CMatrix eigenvector_at(const MetricGraph& graph, const BondScatteringMatrix& s0, double lambda, int multiplicity,
                       double tol) {
  return fixed_point_basis(evolution_operator(graph, s0, lambda), multiplicity, tol);
}

LambdaSpectrum solve_spectrum(const MetricGraph& graph, const BondScatteringMatrix& s0, double lambda_max,
                              const SolveOptions& options) {
  if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) throw ValidationError("solve_spectrum: lambda_max must be > 0");
  if (s0.dim() != graph.dim()) throw ValidationError("solve_spectrum: S0 dimension does not match graph");
  const RVector x0 = options.base_point.size() == 0 ? RVector::Zero(static_cast<Eigen::Index>(graph.num_bonds()))
                                                    : options.base_point;
  const CrossingCounter counter(graph, s0, x0);

  // a root sitting exactly on lambda_max must not be lost to rounding
  const double edge = lambda_max + kDegeneracyGap * std::max(1.0, lambda_max);
  const double window = options.window > 0.0 ? options.window : std::max(64.0 * counter.scan_step(), lambda_max / 64.0);
  const auto n_windows = static_cast<std::size_t>(std::ceil(edge / window));
  std::vector<std::vector<CrossingCounter::Crossing>> parts(n_windows);
  for_each_chunk(n_windows, options.workers, [&](std::size_t w) {
    const double a = static_cast<double>(w) * window;
    const double b = w + 1 == n_windows ? edge : static_cast<double>(w + 1) * window;
    parts[w] = counter.crossings(a, b);
  });

  // merge windows, re-clustering across seams
  std::vector<SpectralLevel> levels;
  for (const auto& part : parts) {
    for (const auto& c : part) {
      if (c.time <= kZeroExclusion) continue;
      if (!levels.empty() && c.time - levels.back().lambda <= kDegeneracyGap) {
        auto& last = levels.back();
        last.lambda = (last.lambda * last.multiplicity + c.time * c.multiplicity) / (last.multiplicity + c.multiplicity);
        last.multiplicity += c.multiplicity;
      } else {
        levels.push_back({c.time, c.multiplicity, {}});
      }
    }
  }

  if (options.compute_vectors) {
    for_each_chunk(n_windows, options.workers, [&](std::size_t w) {
      const double a = static_cast<double>(w) * window;
      const double b = w + 1 == n_windows ? edge + window : a + window;
      for (auto& level : levels) {
        if (level.lambda <= a || level.lambda > b) continue;
        level.basis = fixed_point_basis(counter.operator_at(level.lambda), level.multiplicity);
      }
    });
    // levels beyond the last window edge through rounding
    for (auto& level : levels) {
      if (level.basis.size() == 0) level.basis = fixed_point_basis(counter.operator_at(level.lambda), level.multiplicity);
    }
  }
  return {std::move(levels), lambda_max, graph_fingerprint(graph, s0), options.compute_vectors};
}

WeylReport weyl_check(const LambdaSpectrum& spectrum, const MetricGraph& graph) {
  if (spectrum.size() == 0) throw ValidationError("weyl_check: empty spectrum");
  WeylReport r;
  r.count = spectrum.size();
  r.capital_lambda = spectrum.lambda_max();
  r.weyl_count = graph.total_length() * r.capital_lambda / M_PI;
  r.ratio = static_cast<double>(r.count) / r.weyl_count;
  r.remainder = static_cast<double>(r.count) - r.weyl_count;
  return r;
}

WindowReport window_count_bounds(const LambdaSpectrum& spectrum, const MetricGraph& graph, std::size_t trials,
                                 std::uint64_t seed) {
  WindowReport r;
  r.trials = trials;
  r.long_window = 2.0 * M_PI / graph.min_length();
  r.short_window = 2.0 * M_PI / graph.max_length();
  const double span = spectrum.lambda_max() - r.long_window;
  if (span <= 0.0) throw ValidationError("window_count_bounds: window extends beyond computed range");

  const auto values = spectrum.expanded();
  auto count_in = [&](double s, double w) {
    // (s, s + w]
    const auto lo = std::upper_bound(values.begin(), values.end(), s);
    const auto hi = std::upper_bound(values.begin(), values.end(), s + w);
    return static_cast<std::size_t>(hi - lo);
  };

  const std::size_t dim = graph.dim();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> start(0.0, span);
  r.min_long_count = std::numeric_limits<std::size_t>::max();
  for (std::size_t k = 0; k < trials; ++k) {
    const double s = start(rng);
    const auto n_long = count_in(s, r.long_window);
    const auto n_short = count_in(s, r.short_window);
    r.min_long_count = std::min(r.min_long_count, n_long);
    r.max_short_count = std::max(r.max_short_count, n_short);
    if (n_long < dim) ++r.long_violations;
    if (n_short > dim) ++r.short_violations;
  }
  r.passed = r.long_violations == 0 && r.short_violations == 0;
  return r;
}

std::optional<std::vector<int>> find_integer_relation(const RVector& lengths, int max_coeff, double tol) {
  const auto b = static_cast<std::size_t>(lengths.size());
  const double scale = tol * lengths.cwiseAbs().maxCoeff();
  const double combos = std::pow(2.0 * max_coeff + 1.0, static_cast<double>(b));

  auto search = [&](const std::vector<std::size_t>& idx) -> std::optional<std::vector<int>> {
    std::vector<int> k(idx.size(), -max_coeff);
    for (;;) {
      // canonical sign: first nonzero coefficient positive
      auto first = std::find_if(k.begin(), k.end(), [](int c) { return c != 0; });
      if (first != k.end() && *first > 0) {
        double s = 0.0;
        for (std::size_t j = 0; j < idx.size(); ++j) s += k[j] * lengths[static_cast<Eigen::Index>(idx[j])];
        if (std::abs(s) <= scale) {
          std::vector<int> full(b, 0);
          for (std::size_t j = 0; j < idx.size(); ++j) full[idx[j]] = k[j];
          return full;
        }
      }
      std::size_t pos = 0;
      while (pos < k.size() && ++k[pos] > max_coeff) k[pos++] = -max_coeff;
      if (pos == k.size()) return std::nullopt;
    }
  };

  if (combos <= 2e7) {
    std::vector<std::size_t> all(b);
    for (std::size_t j = 0; j < b; ++j) all[j] = j;
    return search(all);
  }
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      if (auto r = search({i, j})) return r;
      for (std::size_t l = j + 1; l < b; ++l) {
        if (auto r = search({i, j, l})) return r;
      }
    }
  }
  return std::nullopt;
}

void write_spectrum_csv(const LambdaSpectrum& spectrum, const std::filesystem::path& path, const std::string& header) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  if (!header.empty()) out << header << '\n';
  out << "n,lambda,multiplicity\n" << std::setprecision(17);
  std::size_t n = 0;
  for (const auto& l : spectrum.levels()) out << ++n << ',' << l.lambda << ',' << l.multiplicity << '\n';
}

void write_eigenvector_csv(const LambdaSpectrum& spectrum, const std::filesystem::path& path,
                           const std::string& header) {
  if (!spectrum.has_vectors()) throw ValidationError("write_eigenvector_csv: spectrum has no eigenvectors");
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  if (!header.empty()) out << header << '\n';
  const auto dim = spectrum.levels().empty() ? 0 : spectrum.levels().front().basis.rows();
  out << "n,lambda,k";
  for (Eigen::Index d = 0; d < dim; ++d) out << ",re_" << d << ",im_" << d;
  out << '\n' << std::setprecision(17);
  std::size_t n = 0;
  for (const auto& l : spectrum.levels()) {
    ++n;
    for (Eigen::Index k = 0; k < l.basis.cols(); ++k) {
      out << n << ',' << l.lambda << ',' << k;
      for (Eigen::Index d = 0; d < dim; ++d) out << ',' << l.basis(d, k).real() << ',' << l.basis(d, k).imag();
      out << '\n';
    }
  }
}

}  // namespace qgraph
