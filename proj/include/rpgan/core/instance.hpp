// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rpgan/autodiff/tensor.hpp"
#include "rpgan/core/route.hpp"

namespace rpgan {

using ad::Shape;
using ad::Tensor;

enum class InstanceKind { FullyConnected, Conv, ResidualBlock, OutputConv };
enum class Activation { Identity, ReLU, LeakyReLU, Tanh };

inline constexpr double kLeakySlope = 0.2;

std::string_view to_string(InstanceKind kind);
std::string_view to_string(Activation act);
InstanceKind parse_instance_kind(std::string_view text);
Activation parse_activation(std::string_view text);

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation act);

/// The computational unit a bucket replicates. Every instance of a bucket
/// shares one spec, hence identical parameter shapes.
///
/// `activation` is applied after the unit for fully-connected and conv
/// kinds. Residual blocks use it for both internal nonlinearities; output
/// convs apply it before their convolution.
struct LayerSpec {
  InstanceKind kind = InstanceKind::FullyConnected;
  Activation activation = Activation::Identity;
  // fully-connected
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Shape out_shape;  // optional per-sample reshape of the output, e.g. {C, H, W}
  // convolutional kinds
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  bool upsample = false;
  bool bias = true;

  static LayerSpec fully_connected(std::size_t in, std::size_t out, Activation act,
                                   Shape reshape_to = {});
  static LayerSpec conv(std::size_t in_ch, std::size_t out_ch, Activation act, bool upsample,
                        std::size_t kernel = 3);
  static LayerSpec residual(std::size_t in_ch, std::size_t out_ch, Activation act, bool upsample);
  static LayerSpec output_conv(std::size_t in_ch, std::size_t out_ch, Activation act);

  bool linear() const { return activation == Activation::Identity; }
  /// (name, shape) of every parameter, in storage order.
  std::vector<std::pair<std::string, Shape>> parameter_shapes() const;
  /// Per-sample output shape for a per-sample input shape; throws ShapeError.
  Shape output_shape(const Shape& input) const;
  /// Multiply-adds for one sample.
  std::size_t macs(const Shape& input) const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

/// One concrete parameterization of a LayerSpec. Copies share parameter
/// storage; clone() makes an independent copy.
template <typename T>
struct Instance {
  LayerSpec spec;
  std::vector<Parameter<T>> params;
  bool trainable = true;

  /// Fresh parameters: weights ~ N(0, 1/fan_in), biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Instance create(const LayerSpec& spec, Rng& rng);

  /// x has a leading batch axis.
  Tensor<T> forward(const Tensor<T>& x) const;
  const Tensor<T>& param(std::string_view name) const;
  Instance clone() const;
};

}  // namespace rpgan
