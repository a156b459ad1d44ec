#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace qgraph {

// Value of a spectral functional with its dispersion.
//
// For Monte-Carlo estimates `stderr_` is the usual standard error. For
// deterministic truncations (ergodic sums, quadratures) it is a batch-means
// estimate and `diagnostic` carries the truncation check named in `note`.
struct StatResult {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t samples = 0;
  double diagnostic = 0.0;
  std::string note;
};

// Mean of `values` with a batch-means standard error over `batches`
// contiguous blocks (capped by the sample count).
StatResult batch_mean(const std::vector<double>& values, std::size_t batches = 32);

// sum(values) / sum(weights), with batch-means error over contiguous blocks
// of (value, weight) pairs. Used where one level stands for several samples.
StatResult batch_ratio(const std::vector<double>& values, const std::vector<double>& weights,
                       std::size_t batches = 32);

// |a - b| / sqrt(se_a^2 + se_b^2); infinite when both errors vanish and a != b.
double sigma_distance(const StatResult& a, const StatResult& b);

}  // namespace qgraph
