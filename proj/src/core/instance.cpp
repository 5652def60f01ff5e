// SPDX-License-Identifier: Apache-2.0
#include "rpgan/core/instance.hpp"

#include <cmath>
#include <stdexcept>

#include "rpgan/autodiff/ops.hpp"

namespace rpgan {

std::string_view to_string(InstanceKind kind) {
  switch (kind) {
    case InstanceKind::FullyConnected: return "fc";
    case InstanceKind::Conv: return "conv";
    case InstanceKind::ResidualBlock: return "resblock";
    case InstanceKind::OutputConv: return "output_conv";
  }
  return "?";
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::LeakyReLU: return "leaky_relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

InstanceKind parse_instance_kind(std::string_view text) {
  for (auto k : {InstanceKind::FullyConnected, InstanceKind::Conv, InstanceKind::ResidualBlock,
                 InstanceKind::OutputConv})
    if (to_string(k) == text) return k;
  throw std::invalid_argument("unknown instance kind '" + std::string(text) + "'");
}

Activation parse_activation(std::string_view text) {
  for (auto a : {Activation::Identity, Activation::ReLU, Activation::LeakyReLU, Activation::Tanh})
    if (to_string(a) == text) return a;
  throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

template <typename T>
Tensor<T> apply_activation(const Tensor<T>& x, Activation act) {
  switch (act) {
    case Activation::Identity: return x;
    case Activation::ReLU: return ad::relu(x);
    case Activation::LeakyReLU: return ad::leaky_relu(x, static_cast<T>(kLeakySlope));
    case Activation::Tanh: return ad::tanh(x);
  }
  return x;
}

LayerSpec LayerSpec::fully_connected(std::size_t in, std::size_t out, Activation act,
                                     Shape reshape_to) {
  LayerSpec s;
  s.kind = InstanceKind::FullyConnected;
  s.activation = act;
  s.in_features = in;
  s.out_features = out;
  if (!reshape_to.empty() && ad::numel(reshape_to) != out) {
    throw ad::ShapeError("fc output reshape " + ad::to_string(reshape_to) + " does not hold " +
                         std::to_string(out) + " features");
  }
  s.out_shape = std::move(reshape_to);
  return s;
}

LayerSpec LayerSpec::conv(std::size_t in_ch, std::size_t out_ch, Activation act, bool upsample,
                          std::size_t kernel) {
  if (kernel % 2 == 0) throw std::invalid_argument("conv instances need an odd kernel");
  LayerSpec s;
  s.kind = InstanceKind::Conv;
  s.activation = act;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.upsample = upsample;
  return s;
}

LayerSpec LayerSpec::residual(std::size_t in_ch, std::size_t out_ch, Activation act,
                              bool upsample) {
  LayerSpec s = conv(in_ch, out_ch, act, upsample, 3);
  s.kind = InstanceKind::ResidualBlock;
  return s;
}

LayerSpec LayerSpec::output_conv(std::size_t in_ch, std::size_t out_ch, Activation act) {
  LayerSpec s = conv(in_ch, out_ch, act, false, 3);
  s.kind = InstanceKind::OutputConv;
  return s;
}

std::vector<std::pair<std::string, Shape>> LayerSpec::parameter_shapes() const {
  std::vector<std::pair<std::string, Shape>> out;
  switch (kind) {
    case InstanceKind::FullyConnected:
      out.emplace_back("weight", Shape{in_features, out_features});
      if (bias) out.emplace_back("bias", Shape{out_features});
      break;
    case InstanceKind::Conv:
    case InstanceKind::OutputConv:
      out.emplace_back("weight", Shape{out_channels, in_channels, kernel, kernel});
      if (bias) out.emplace_back("bias", Shape{out_channels});
      break;
    case InstanceKind::ResidualBlock:
      out.emplace_back("conv1.weight", Shape{out_channels, in_channels, 3, 3});
      if (bias) out.emplace_back("conv1.bias", Shape{out_channels});
      out.emplace_back("conv2.weight", Shape{out_channels, out_channels, 3, 3});
      if (bias) out.emplace_back("conv2.bias", Shape{out_channels});
      if (in_channels != out_channels)
        out.emplace_back("skip.weight", Shape{out_channels, in_channels, 1, 1});
      break;
  }
  return out;
}

Shape LayerSpec::output_shape(const Shape& input) const {
  if (kind == InstanceKind::FullyConnected) {
    if (ad::numel(input) != in_features) {
      throw ad::ShapeError("fc instance expects " + std::to_string(in_features) +
                           " input features, got " + ad::to_string(input));
    }
    return out_shape.empty() ? Shape{out_features} : out_shape;
  }
  if (input.size() != 3 || input[0] != in_channels) {
    throw ad::ShapeError(std::string(to_string(kind)) + " instance expects [" +
                         std::to_string(in_channels) + "xHxW] input, got " + ad::to_string(input));
  }
  const std::size_t f = upsample ? 2 : 1;
  return Shape{out_channels, input[1] * f, input[2] * f};
}

std::size_t LayerSpec::macs(const Shape& input) const {
  if (kind == InstanceKind::FullyConnected) return in_features * out_features;
  const Shape out = output_shape(input);
  const std::size_t pixels = out[1] * out[2];
  switch (kind) {
    case InstanceKind::Conv:
    case InstanceKind::OutputConv:
      return pixels * out_channels * in_channels * kernel * kernel;
    case InstanceKind::ResidualBlock: {
      std::size_t total = pixels * out_channels * (in_channels + out_channels) * 9;
      if (in_channels != out_channels) total += pixels * out_channels * in_channels;
      return total;
    }
    default: return 0;
  }
}

namespace {

std::size_t fan_in(const Shape& weight_shape, InstanceKind kind) {
  if (kind == InstanceKind::FullyConnected) return weight_shape[0];
  return weight_shape[1] * weight_shape[2] * weight_shape[3];
}

template <typename T>
Tensor<T> conv_with_bias(const Instance<T>& inst, const Tensor<T>& x, const std::string& prefix,
                         std::size_t pad) {
  auto y = ad::conv2d(x, inst.param(prefix + "weight"), 1, pad);
  if (inst.spec.bias) y = ad::add_channel_bias(y, inst.param(prefix + "bias"));
  return y;
}

}  // namespace

template <typename T>
Instance<T> Instance<T>::create(const LayerSpec& spec, Rng& rng) {
  Instance inst;
  inst.spec = spec;
  std::size_t last_fan_in = 1;
  for (const auto& [name, shape] : spec.parameter_shapes()) {
    std::vector<T> values(ad::numel(shape));
    const bool is_bias = name.ends_with("bias");
    if (!is_bias) last_fan_in = fan_in(shape, spec.kind);
    const double bound = 1.0 / std::sqrt(static_cast<double>(last_fan_in));
    if (is_bias) {
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : values) v = static_cast<T>(dist(rng));
    } else {
      std::normal_distribution<double> dist(0.0, bound);
      for (auto& v : values) v = static_cast<T>(dist(rng));
    }
    inst.params.push_back({name, Tensor<T>(shape, std::move(values), true)});
  }
  return inst;
}

template <typename T>
const Tensor<T>& Instance<T>::param(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return p.tensor;
  throw std::out_of_range("instance has no parameter '" + std::string(name) + "'");
}

template <typename T>
Instance<T> Instance<T>::clone() const {
  Instance copy = *this;
  for (auto& p : copy.params) p.tensor = p.tensor.clone();
  return copy;
}

template <typename T>
Tensor<T> Instance<T>::forward(const Tensor<T>& x) const {
  const std::size_t batch = x.dim(0);
  switch (spec.kind) {
    case InstanceKind::FullyConnected: {
      auto flat = x.rank() == 2 ? x : ad::reshape(x, Shape{batch, ad::numel(x.shape()) / batch});
      if (flat.dim(1) != spec.in_features) {
        throw ad::ShapeError("fc instance expects " + std::to_string(spec.in_features) +
                             " input features, got " + ad::to_string(x.shape()));
      }
      auto y = ad::matmul(flat, param("weight"));
      if (spec.bias) y = ad::add_row_bias(y, param("bias"));
      y = apply_activation(y, spec.activation);
      if (!spec.out_shape.empty()) {
        Shape shape{batch};
        shape.insert(shape.end(), spec.out_shape.begin(), spec.out_shape.end());
        y = ad::reshape(y, shape);
      }
      return y;
    }
    case InstanceKind::Conv: {
      auto h = spec.upsample ? ad::upsample2x(x) : x;
      return apply_activation(conv_with_bias(*this, h, "", spec.kernel / 2), spec.activation);
    }
    case InstanceKind::ResidualBlock: {
      auto h = apply_activation(x, spec.activation);
      if (spec.upsample) h = ad::upsample2x(h);
      h = conv_with_bias(*this, h, "conv1.", 1);
      h = apply_activation(h, spec.activation);
      h = conv_with_bias(*this, h, "conv2.", 1);
      auto skip = spec.upsample ? ad::upsample2x(x) : x;
      if (spec.in_channels != spec.out_channels) skip = ad::conv2d(skip, param("skip.weight"), 1, 0);
      return ad::add(h, skip);
    }
    case InstanceKind::OutputConv: {
      auto h = apply_activation(x, spec.activation);
      return conv_with_bias(*this, h, "", spec.kernel / 2);
    }
  }
  return x;
}

template Tensor<float> apply_activation(const Tensor<float>&, Activation);
template Tensor<double> apply_activation(const Tensor<double>&, Activation);
template struct Instance<float>;
template struct Instance<double>;

}  // namespace rpgan
