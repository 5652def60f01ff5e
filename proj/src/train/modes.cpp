// SPDX-License-Identifier: Apache-2.0
#include "rpgan/train/modes.hpp"

#include <cmath>
#include <limits>

namespace rpgan::train {

template <typename T>
ModeCoverage mode_coverage(const ad::Tensor<T>& samples,
                           const std::vector<std::array<double, 2>>& centers, double sigma,
                           double min_fraction) {
  if (samples.rank() != 2 || samples.dim(1) != 2) {
    throw ad::ShapeError("mode_coverage expects [N,2] points, got " + ad::to_string(samples.shape()));
  }
  ModeCoverage out;
  out.counts.assign(centers.size(), 0);
  const std::size_t n = samples.dim(0);
  auto d = samples.data();
  std::size_t near = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.size(); ++k) {
      const double dist = std::hypot(d[2 * i] - centers[k][0], d[2 * i + 1] - centers[k][1]);
      if (dist < best_dist) best_dist = dist, best = k;
    }
    if (best_dist <= 3.0 * sigma) {
      out.counts[best]++;
      near++;
    }
  }
  for (auto c : out.counts) out.covered += c > 0 && static_cast<double>(c) >= min_fraction * n;
  out.high_quality = n ? static_cast<double>(near) / n : 0.0;
  return out;
}

template ModeCoverage mode_coverage(const ad::Tensor<float>&, const std::vector<std::array<double, 2>>&, double, double);
template ModeCoverage mode_coverage(const ad::Tensor<double>&, const std::vector<std::array<double, 2>>&, double, double);

}  // namespace rpgan::train
