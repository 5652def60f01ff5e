// SPDX-License-Identifier: Apache-2.0
#include "rpgan/io/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rpgan/io/errors.hpp"

namespace rpgan::io {

std::size_t Dataset::size() const {
  const std::size_t width = sample_size();
  return width == 0 ? 0 : values.size() / width;
}

std::span<const float> Dataset::sample(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("sample " + std::to_string(i) + " of " + std::to_string(size()));
  const std::size_t width = sample_size();
  return std::span<const float>(values).subspan(i * width, width);
}

template <typename T>
Tensor<T> Dataset::gather(std::span<const std::size_t> indices) const {
  const std::size_t width = sample_size();
  std::vector<T> out;
  out.reserve(indices.size() * width);
  for (auto i : indices)
    for (float v : sample(i)) out.push_back(static_cast<T>(v));
  Shape shape{indices.size()};
  shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
  return Tensor<T>(shape, std::move(out));
}

template <typename T>
Tensor<T> Dataset::sample_batch(std::size_t batch, Rng& rng) const {
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = uniform_index(rng, size());
  return gather<T>(idx);
}

Dataset Dataset::select(std::span<const std::size_t> indices) const {
  Dataset out{sample_shape, {}, {}};
  out.values.reserve(indices.size() * sample_size());
  for (auto i : indices) {
    auto s = sample(i);
    out.values.insert(out.values.end(), s.begin(), s.end());
    if (!labels.empty()) out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset Dataset::filter(const std::function<bool(int)>& keep) const {
  if (labels.empty()) throw std::invalid_argument("filtering by label needs a labelled dataset");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (keep(labels[i])) idx.push_back(i);
  return select(idx);
}

void Dataset::validate() const {
  const std::size_t width = sample_size();
  if (width == 0 || values.empty()) throw FormatError("dataset is empty");
  if (values.size() % width != 0) {
    throw FormatError("dataset holds " + std::to_string(values.size()) +
                      " values, not a multiple of sample size " + std::to_string(width));
  }
  if (!labels.empty() && labels.size() != size()) {
    throw FormatError("dataset has " + std::to_string(size()) + " samples but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!(values[i] >= -1.0f && values[i] <= 1.0f)) {
      throw FormatError("dataset value " + std::to_string(values[i]) + " at offset " +
                        std::to_string(i) + " is outside [-1, 1]");
    }
}

std::vector<std::array<double, 2>> ring_centers(std::size_t modes, double radius) {
  std::vector<std::array<double, 2>> centers(modes);
  for (std::size_t k = 0; k < modes; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(modes);
    centers[k] = {radius * std::cos(angle), radius * std::sin(angle)};
  }
  return centers;
}

Dataset synth_mixture(std::size_t modes, double radius, double sigma, std::size_t n, Rng& rng) {
  if (modes == 0) throw std::invalid_argument("synth_mixture needs at least one mode");
  if (sigma < 0) throw std::invalid_argument("synth_mixture sigma must be >= 0");
  const auto centers = ring_centers(modes, radius);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds{{2}, {}, {}};
  ds.values.reserve(2 * n);
  ds.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = uniform_index(rng, modes);
    for (int d = 0; d < 2; ++d) {
      const double v = centers[k][d] + sigma * noise(rng);
      ds.values.push_back(static_cast<float>(std::clamp(v, -1.0, 1.0)));
    }
    ds.labels.push_back(static_cast<int>(k));
  }
  return ds;
}

std::array<double, 3> hue_tint(double hue) {
  // HSV with S = V = 1.
  const double h = (hue - std::floor(hue)) * 6.0;
  const int sector = std::min(static_cast<int>(h), 5);
  const double f = h - sector;
  switch (sector) {
    case 0: return {1.0, f, 0.0};
    case 1: return {1.0 - f, 1.0, 0.0};
    case 2: return {0.0, 1.0, f};
    case 3: return {0.0, 1.0 - f, 1.0};
    case 4: return {f, 0.0, 1.0};
    default: return {1.0, 0.0, 1.0 - f};
  }
}

std::vector<float> apply_tint(std::span<const float> gray, const std::array<double, 3>& tint) {
  std::vector<float> out(3 * gray.size());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < gray.size(); ++i) {
      const double intensity = (static_cast<double>(gray[i]) + 1.0) / 2.0;
      out[c * gray.size() + i] = static_cast<float>(intensity * tint[c] * 2.0 - 1.0);
    }
  return out;
}

Dataset colorize(const Dataset& gray, Rng& rng, std::vector<double>* hues) {
  if (gray.sample_shape.size() != 3 || gray.sample_shape[0] != 1) {
    throw ad::ShapeError("colorize expects [1,H,W] samples, got " + ad::to_string(gray.sample_shape));
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Dataset out{{3, gray.sample_shape[1], gray.sample_shape[2]}, {}, gray.labels};
  out.values.reserve(3 * gray.values.size());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const double hue = uniform(rng);
    if (hues) hues->push_back(hue);
    auto rgb = apply_tint(gray.sample(i), hue_tint(hue));
    out.values.insert(out.values.end(), rgb.begin(), rgb.end());
  }
  return out;
}

template Tensor<float> Dataset::gather(std::span<const std::size_t>) const;
template Tensor<double> Dataset::gather(std::span<const std::size_t>) const;
template Tensor<float> Dataset::sample_batch(std::size_t, Rng&) const;
template Tensor<double> Dataset::sample_batch(std::size_t, Rng&) const;

}  // namespace rpgan::io
