// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "rpgan/autodiff/tensor.hpp"
#include "rpgan/core/route.hpp"

namespace rpgan::train {

/// Persistent power-iteration vector for one weight, viewed as a matrix with
/// dim(0) rows.
struct SpectralState {
  std::vector<double> u;
  double sigma = 0.0;  // estimate from the latest updating call

  static SpectralState random(std::size_t rows, Rng& rng);
};

/// w / sigma_hat, where sigma_hat = u^T W v after one power-iteration step
/// from the stored u. sigma_hat carries gradient through W while u and v are
/// constants. With `update` the refined u and sigma_hat are stored back;
/// without it the state is only read, so concurrent callers are safe. A
/// (near) zero matrix is returned unchanged.
template <typename T>
ad::Tensor<T> spectral_normalize(const ad::Tensor<T>& w, SpectralState& state, bool update);

}  // namespace rpgan::train
