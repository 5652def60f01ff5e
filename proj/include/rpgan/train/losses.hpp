// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "rpgan/autodiff/tensor.hpp"
#include "rpgan/core/route.hpp"

namespace rpgan::train {

template <typename T>
struct GanLosses {
  ad::Tensor<T> d;
  ad::Tensor<T> g;
};

/// d: mean(relu(1 - d_real)) + mean(relu(1 + d_fake)); g: -mean(d_fake).
template <typename T>
GanLosses<T> hinge_losses(const ad::Tensor<T>& d_real, const ad::Tensor<T>& d_fake);

/// d: mean(d_fake) - mean(d_real) + coef * penalty; g: -mean(d_fake).
template <typename T>
GanLosses<T> wgan_penalty_losses(const ad::Tensor<T>& d_real, const ad::Tensor<T>& d_fake,
                                 const ad::Tensor<T>& penalty, T coef = T(10));

template <typename T>
using Critic = std::function<ad::Tensor<T>(const ad::Tensor<T>&)>;

/// mean over samples of (||d critic / d x_hat|| - 1)^2 at x_hat = a*real +
/// (1-a)*fake, one uniform a per sample. Differentiable w.r.t. the critic's
/// parameters.
template <typename T>
ad::Tensor<T> gradient_penalty(const Critic<T>& critic, const ad::Tensor<T>& real,
                               const ad::Tensor<T>& fake, Rng& rng);

/// Same, with explicit per-sample mixing weights.
template <typename T>
ad::Tensor<T> gradient_penalty(const Critic<T>& critic, const ad::Tensor<T>& real,
                               const ad::Tensor<T>& fake, std::span<const T> alpha);

}  // namespace rpgan::train
