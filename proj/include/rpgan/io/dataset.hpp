// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rpgan/autodiff/tensor.hpp"
#include "rpgan/core/route.hpp"

namespace rpgan::io {

using ad::Shape;
using ad::Tensor;

/// N samples of one shape ([C,H,W] images or [2] points), values in [-1, 1].
struct Dataset {
  Shape sample_shape;
  std::vector<float> values;
  std::vector<int> labels;  // empty, or one per sample

  std::size_t size() const;
  std::size_t sample_size() const { return ad::numel(sample_shape); }
  std::span<const float> sample(std::size_t i) const;

  /// [k, sample_shape...] tensor of the listed samples.
  template <typename T>
  Tensor<T> gather(std::span<const std::size_t> indices) const;
  /// Uniformly drawn batch, with replacement.
  template <typename T>
  Tensor<T> sample_batch(std::size_t batch, Rng& rng) const;

  Dataset select(std::span<const std::size_t> indices) const;
  /// Samples whose label satisfies `keep`; requires labels.
  Dataset filter(const std::function<bool(int)>& keep) const;

  /// Throws FormatError on empty data, size mismatches or out-of-range values.
  void validate() const;
};

/// Centers of `modes` equally spaced points on a circle, the first at (radius, 0).
std::vector<std::array<double, 2>> ring_centers(std::size_t modes, double radius);

/// n points from an equal-weight mixture of isotropic Gaussians on a ring;
/// labels hold the mode index. Coordinates are clamped to [-1, 1].
Dataset synth_mixture(std::size_t modes, double radius, double sigma, std::size_t n, Rng& rng);

/// Fully saturated RGB tint for hue in [0, 1): max component 1, min 0.
std::array<double, 3> hue_tint(double hue);

/// [1,H,W] gray sample tinted to [3,H,W]: intensities in [0,1] are scaled per
/// channel by the tint, then mapped back to [-1,1].
std::vector<float> apply_tint(std::span<const float> gray, const std::array<double, 3>& tint);

/// Tints every sample with an independently drawn uniform hue. The drawn
/// hues are appended to `hues` when given.
Dataset colorize(const Dataset& gray, Rng& rng, std::vector<double>* hues = nullptr);

}  // namespace rpgan::io
