// SPDX-License-Identifier: Apache-2.0
#include "rpgan/train/discriminator.hpp"

#include <cmath>
#include <sstream>

#include "rpgan/autodiff/ops.hpp"
#include "rpgan/io/errors.hpp"

namespace rpgan::train {

namespace {

constexpr std::size_t kKernel = 4;

std::string join(const std::vector<std::size_t>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> parse_list(const std::string& s, char sep) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(std::stoull(item));
  return out;
}

}  // namespace

std::size_t DiscriminatorArch::flat_features() const {
  if (channels.empty()) return ad::numel(input_shape);
  if (input_shape.size() != 3) {
    throw ad::ShapeError("conv discriminator needs [C,H,W] input, got " + ad::to_string(input_shape));
  }
  std::size_t h = input_shape[1], w = input_shape[2];
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (h % 2 || w % 2 || h < 2 || w < 2) {
      throw ad::ShapeError("discriminator conv " + std::to_string(i) + " needs even spatial size, got " +
                           std::to_string(h) + "x" + std::to_string(w));
    }
    h /= 2;
    w /= 2;
  }
  return channels.back() * h * w;
}

template <typename T>
Discriminator<T> Discriminator<T>::create(const DiscriminatorArch& arch, Rng& rng) {
  Discriminator d;
  d.arch_ = arch;
  std::vector<std::pair<std::string, Shape>> weights;
  std::size_t in_ch = arch.input_shape.empty() ? 0 : arch.input_shape[0];
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    weights.emplace_back("conv" + std::to_string(i), Shape{arch.channels[i], in_ch, kKernel, kKernel});
    in_ch = arch.channels[i];
  }
  std::size_t in = arch.flat_features();
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
    weights.emplace_back("fc" + std::to_string(i), Shape{in, arch.hidden[i]});
    in = arch.hidden[i];
  }
  weights.emplace_back("out", Shape{in, 1});
  for (const auto& [name, shape] : weights) {
    const std::size_t fan_in = shape.size() == 4 ? shape[1] * shape[2] * shape[3] : shape[0];
    const std::size_t outs = shape.size() == 4 ? shape[0] : shape[1];
    const double sd = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::normal_distribution<double> normal(0.0, sd);
    std::uniform_real_distribution<double> uniform(-sd, sd);
    std::vector<T> w(ad::numel(shape)), b(outs);
    for (auto& v : w) v = static_cast<T>(normal(rng));
    for (auto& v : b) v = static_cast<T>(uniform(rng));
    d.params_.push_back({name + ".weight", Tensor<T>(shape, std::move(w), true)});
    d.params_.push_back({name + ".bias", Tensor<T>({outs}, std::move(b), true)});
    d.sn_.push_back(SpectralState::random(shape[0], rng));
  }
  return d;
}

template <typename T>
Tensor<T> Discriminator<T>::weight(std::size_t layer, bool training) const {
  const auto& w = params_[2 * layer].tensor;
  return spectral_norm_ ? spectral_normalize(w, sn_[layer], training) : w;
}

template <typename T>
Tensor<T> Discriminator<T>::trunk(const Tensor<T>& x, bool training) const {
  Shape expected{x.rank() ? x.dim(0) : 0};
  expected.insert(expected.end(), arch_.input_shape.begin(), arch_.input_shape.end());
  if (x.shape() != expected) {
    throw ad::ShapeError("discriminator expects " + ad::to_string(expected) + ", got " + ad::to_string(x.shape()));
  }
  const std::size_t n = x.dim(0);
  const T slope = static_cast<T>(kLeakySlope);
  Tensor<T> h = x;
  std::size_t layer = 0;
  for (; layer < arch_.channels.size(); ++layer) {
    h = ad::conv2d(h, weight(layer, training), 2, 1);
    h = ad::leaky_relu(ad::add_channel_bias(h, params_[2 * layer + 1].tensor), slope);
  }
  h = ad::reshape(h, Shape{n, h.numel() / n});
  for (std::size_t i = 0; i < arch_.hidden.size(); ++i, ++layer) {
    h = ad::add_row_bias(ad::matmul(h, weight(layer, training)), params_[2 * layer + 1].tensor);
    h = ad::leaky_relu(h, slope);
  }
  return h;
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& x, bool training) {
  auto h = trunk(x, training);
  const std::size_t last = sn_.size() - 1;
  auto score = ad::add_row_bias(ad::matmul(h, weight(last, training)), params_[2 * last + 1].tensor);
  return ad::reshape(score, Shape{x.dim(0)});
}

template <typename T>
Tensor<T> Discriminator<T>::features(const Tensor<T>& x) const {
  return trunk(x, false);
}

template <typename T>
std::vector<ParameterRef<T>> Discriminator<T>::parameters() const {
  std::vector<ParameterRef<T>> out;
  for (const auto& p : params_) out.push_back({p.name, p.tensor, true});
  return out;
}

template <typename T>
Parameter<T>& Discriminator<T>::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw std::out_of_range("discriminator has no parameter '" + name + "'");
}

void put_discriminator(io::Checkpoint& ckpt, Discriminator<float>& disc, const std::string& prefix) {
  const auto& arch = disc.arch();
  ckpt.meta[prefix + "input_shape"] = join(arch.input_shape, 'x');
  ckpt.meta[prefix + "channels"] = join(arch.channels, ',');
  ckpt.meta[prefix + "hidden"] = join(arch.hidden, ',');
  ckpt.meta[prefix + "spectral_norm"] = disc.spectral_norm() ? "1" : "0";
  ckpt.meta[prefix + "trained"] = disc.trained() ? "1" : "0";
  std::erase_if(ckpt.tensors, [&](const io::NamedTensor& t) { return t.name.starts_with(prefix); });
  for (const auto& p : disc.parameters()) ckpt.tensors.push_back(io::to_named(prefix + p.name, p.tensor));
  const auto& states = disc.spectral_states();
  for (std::size_t i = 0; i < states.size(); ++i) {
    std::vector<float> u(states[i].u.begin(), states[i].u.end());
    ckpt.tensors.push_back({prefix + "sn_u." + std::to_string(i), {u.size()}, std::move(u)});
  }
}

Discriminator<float> get_discriminator(const io::Checkpoint& ckpt, const std::string& prefix) {
  DiscriminatorArch arch;
  try {
    arch.input_shape = parse_list(ckpt.meta_value(prefix + "input_shape"), 'x');
    arch.channels = parse_list(ckpt.meta_value(prefix + "channels"), ',');
    arch.hidden = parse_list(ckpt.meta_value(prefix + "hidden"), ',');
  } catch (const std::logic_error& e) {
    throw io::FormatError("malformed discriminator architecture in checkpoint: " + std::string(e.what()));
  }
  Rng unused(0);
  auto disc = Discriminator<float>::create(arch, unused);
  for (const auto& p : disc.parameters()) {
    const auto& stored = ckpt.tensor(prefix + p.name);
    if (stored.shape != p.tensor.shape()) {
      throw io::FormatError("tensor '" + stored.name + "' has shape " + ad::to_string(stored.shape) +
                            ", expected " + ad::to_string(p.tensor.shape()));
    }
    disc.param(p.name).tensor = io::from_named(stored);
  }
  auto& states = disc.spectral_states();
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& u = ckpt.tensor(prefix + "sn_u." + std::to_string(i)).data;
    states[i].u.assign(u.begin(), u.end());
  }
  disc.set_spectral_norm(ckpt.meta_value(prefix + "spectral_norm") == "1");
  if (ckpt.meta_value(prefix + "trained") == "1") disc.mark_trained();
  return disc;
}

template class Discriminator<float>;
template class Discriminator<double>;

}  // namespace rpgan::train
