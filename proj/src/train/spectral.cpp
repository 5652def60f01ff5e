// SPDX-License-Identifier: Apache-2.0
#include "rpgan/train/spectral.hpp"

#include <cmath>

#include "rpgan/autodiff/ops.hpp"

namespace rpgan::train {

namespace {

constexpr double kEps = 1e-12;

double normalize(std::vector<double>& x) {
  double n = 0.0;
  for (double v : x) n += v * v;
  n = std::sqrt(n);
  for (auto& v : x) v /= std::max(n, kEps);
  return n;
}

}  // namespace

SpectralState SpectralState::random(std::size_t rows, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SpectralState s;
  s.u.resize(rows);
  for (auto& v : s.u) v = normal(rng);
  normalize(s.u);
  return s;
}

template <typename T>
ad::Tensor<T> spectral_normalize(const ad::Tensor<T>& w, SpectralState& state, bool update) {
  if (w.rank() < 2) throw ad::ShapeError("spectral_normalize needs a matrix view, got " + ad::to_string(w.shape()));
  const std::size_t rows = w.dim(0), cols = w.numel() / rows;
  auto data = w.data();
  std::vector<double> u = state.u;
  if (u.size() != rows) {
    u.assign(rows, 1.0);
    normalize(u);
  }
  std::vector<double> v(cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) v[c] += data[r * cols + c] * u[r];
  normalize(v);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += data[r * cols + c] * v[c];
    u[r] = acc;
  }
  const double sigma = normalize(u);
  if (update) {
    state.u = u;
    state.sigma = sigma;
  }
  if (sigma < kEps) return w;

  std::vector<T> outer(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) outer[r * cols + c] = static_cast<T>(u[r] * v[c]);
  auto sigma_t = ad::sum(ad::mul(w, ad::Tensor<T>(w.shape(), std::move(outer))));
  return ad::mul_scalar(w, ad::reciprocal(sigma_t));
}

template ad::Tensor<float> spectral_normalize(const ad::Tensor<float>&, SpectralState&, bool);
template ad::Tensor<double> spectral_normalize(const ad::Tensor<double>&, SpectralState&, bool);

}  // namespace rpgan::train
