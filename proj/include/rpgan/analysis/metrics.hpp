// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rpgan/autodiff/tensor.hpp"
#include "rpgan/train/discriminator.hpp"

namespace rpgan::analysis {

using ad::Tensor;

inline constexpr std::size_t kColorBins = 25;

/// Frequency-normalized 25-bin histogram of one channel. Values in [-1, 1]
/// become bytes floor((x + 1) / 2 * 255) and byte v lands in bin
/// floor(v * 25 / 256), so 255 falls in the last bin.
template <typename T>
std::array<double, kColorBins> color_histogram(std::span<const T> channel);

/// (1/sqrt(2)) * || sqrt(p) - sqrt(q) ||_2 for probability vectors.
double hellinger(std::span<const double> p, std::span<const double> q);

/// One Hellinger distance per channel of two [C,H,W] (or [H,W]) images.
template <typename T>
std::vector<double> hellinger_color_distance(const Tensor<T>& a, const Tensor<T>& b);

/// The semantic metric cannot be computed (no trained discriminator).
class MetricUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 1 - cosine similarity of the discriminator's penultimate features. This
/// is a feature-space proxy, not LPIPS.
template <typename T>
double semantic_distance(const Tensor<T>& a, const Tensor<T>& b,
                         const train::Discriminator<T>* disc);

enum class Metric { Color, Semantic, Pixel };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view text);

/// Symmetric K x K distance matrix over a group of images.
template <typename T>
using PairwiseMetric = std::function<std::vector<std::vector<double>>(const std::vector<Tensor<T>>&)>;

/// color: mean over channels of the Hellinger color distance.
/// semantic: feature cosine distance, needs a trained discriminator.
/// pixel: root-mean-square pixel difference.
template <typename T>
PairwiseMetric<T> make_metric(Metric metric, const train::Discriminator<T>* disc = nullptr);

}  // namespace rpgan::analysis
