// SPDX-License-Identifier: Apache-2.0
#pragma once

// Central finite-difference oracle used to check analytic gradients. It only
// evaluates the forward function, never the tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rpgan/autodiff/ops.hpp"
#include "rpgan/autodiff/tape.hpp"

namespace rpgan::testing {

using TensorD = ad::Tensor<double>;
using LossFn = std::function<TensorD(const std::vector<TensorD>&)>;

inline TensorD random_tensor(const ad::Shape& shape, std::mt19937_64& rng, double lo = -1.0,
                             double hi = 1.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = dist(rng);
  return TensorD(shape, std::move(v), requires_grad);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Max relative error between backward() gradients and central differences
/// over every entry of every input.
inline double max_gradient_error(const LossFn& f, const std::vector<TensorD>& inputs,
                                 double h = 1e-5) {
  for (auto t : inputs) t.zero_grad();
  ad::backward(f(inputs));
  double worst = 0.0;
  for (auto input : inputs) {
    const auto analytic = input.grad();
    auto data = input.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      double plus, minus;
      {
        ad::NoGradGuard guard;
        data[i] = saved + h;
        plus = f(inputs).item();
        data[i] = saved - h;
        minus = f(inputs).item();
      }
      data[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      worst = std::max(worst, relative_error(analytic[i], numeric));
    }
  }
  return worst;
}

}  // namespace rpgan::testing
