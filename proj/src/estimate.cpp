#include "qgraph/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace qgraph {

StatResult batch_mean(const std::vector<double>& values, std::size_t batches) {
  StatResult r;
  r.samples = values.size();
  if (values.empty()) return r;
  r.estimate = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  const std::size_t nb = std::min(batches, values.size());
  if (nb < 2) return r;
  std::vector<double> means(nb, 0.0);
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t lo = b * values.size() / nb;
    const std::size_t hi = (b + 1) * values.size() / nb;
    means[b] = std::accumulate(values.begin() + static_cast<std::ptrdiff_t>(lo),
                               values.begin() + static_cast<std::ptrdiff_t>(hi), 0.0) /
               static_cast<double>(hi - lo);
  }
  const double m = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(nb);
  double ss = 0.0;
  for (double v : means) ss += (v - m) * (v - m);
  r.stderr_ = std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
  return r;
}

StatResult batch_ratio(const std::vector<double>& values, const std::vector<double>& weights, std::size_t batches) {
  StatResult r;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  r.samples = static_cast<std::size_t>(std::llround(total));
  if (values.empty() || total <= 0.0) return r;
  r.estimate = std::accumulate(values.begin(), values.end(), 0.0) / total;
  const std::size_t nb = std::min(batches, values.size());
  if (nb < 2) return r;
  std::vector<double> ratios;
  for (std::size_t b = 0; b < nb; ++b) {
    const std::size_t lo = b * values.size() / nb;
    const std::size_t hi = (b + 1) * values.size() / nb;
    double v = 0.0;
    double w = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      v += values[k];
      w += weights[k];
    }
    if (w > 0.0) ratios.push_back(v / w);
  }
  if (ratios.size() < 2) return r;
  const double m = std::accumulate(ratios.begin(), ratios.end(), 0.0) / static_cast<double>(ratios.size());
  double ss = 0.0;
  for (double v : ratios) ss += (v - m) * (v - m);
  const auto nr = static_cast<double>(ratios.size());
  r.stderr_ = std::sqrt(ss / (nr - 1.0) / nr);
  return r;
}

double sigma_distance(const StatResult& a, const StatResult& b) {
  const double diff = std::abs(a.estimate - b.estimate);
  const double se = std::hypot(a.stderr_, b.stderr_);
  if (se == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / se;
}

}  // namespace qgraph
