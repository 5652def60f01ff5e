// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "rpgan/autodiff/tensor.hpp"

namespace rpgan::train {

struct ModeCoverage {
  std::vector<std::size_t> counts;  // samples within 3 sigma, per mode
  std::size_t covered = 0;          // modes holding >= min_fraction of the samples
  double high_quality = 0.0;        // fraction of samples within 3 sigma of some mode
};

/// Assigns each 2-D sample [N,2] to the nearest center and counts it when it
/// lies within 3 sigma of that center.
template <typename T>
ModeCoverage mode_coverage(const ad::Tensor<T>& samples,
                           const std::vector<std::array<double, 2>>& centers, double sigma,
                           double min_fraction = 0.01);

}  // namespace rpgan::train
