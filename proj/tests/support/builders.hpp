// SPDX-License-Identifier: Apache-2.0
#pragma once

// Small hand-built generators shared by several test files.

#include <vector>

#include "rpgan/core/generator.hpp"

namespace rpgan::testing {

/// Buckets of scalar, bias-free linear instances: bucket b instance i has
/// weight weights[b][i]. Z = [z], output activation identity.
template <typename T>
Generator<T> scalar_chain(const std::vector<std::vector<double>>& weights, double z = 1.0) {
  LayerSpec spec = LayerSpec::fully_connected(1, 1, Activation::Identity);
  spec.bias = false;
  std::vector<Bucket<T>> buckets;
  for (const auto& row : weights) {
    Bucket<T> bucket{spec, {}};
    for (double w : row) {
      Instance<T> inst;
      inst.spec = spec;
      inst.params.push_back({"weight", Tensor<T>({1, 1}, {static_cast<T>(w)}, true)});
      bucket.instances.push_back(inst);
    }
    buckets.push_back(bucket);
  }
  return Generator<T>(Tensor<T>({1}, {static_cast<T>(z)}, true), buckets, Activation::Identity);
}

/// Three-bucket MLP generator producing 2-D points.
inline GeneratorArch mlp_arch(std::vector<std::size_t> m, std::size_t z_dim = 8,
                              std::size_t hidden = 16) {
  GeneratorArch arch;
  arch.z_shape = {z_dim};
  arch.layers = {LayerSpec::fully_connected(z_dim, hidden, Activation::ReLU),
                 LayerSpec::fully_connected(hidden, hidden, Activation::ReLU),
                 LayerSpec::fully_connected(hidden, 2, Activation::Identity)};
  arch.instances = std::move(m);
  arch.output_activation = Activation::Tanh;
  return arch;
}

/// fc -> residual (upsample) -> output conv, producing 3x8x8 images.
inline GeneratorArch conv_arch(std::vector<std::size_t> m) {
  GeneratorArch arch;
  arch.z_shape = {8};
  arch.layers = {LayerSpec::fully_connected(8, 4 * 4 * 4, Activation::Identity, {4, 4, 4}),
                 LayerSpec::residual(4, 3, Activation::ReLU, true),
                 LayerSpec::output_conv(3, 3, Activation::ReLU)};
  arch.instances = std::move(m);
  arch.output_activation = Activation::Tanh;
  return arch;
}

}  // namespace rpgan::testing
