// SPDX-License-Identifier: Apache-2.0
#include "rpgan/train/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace rpgan::train {

template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, std::span<double> m,
               std::span<double> v, std::uint64_t t, const AdamConfig& cfg) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw std::invalid_argument("adam_step: parameter, gradient and moment sizes differ");
  }
  if (t == 0) throw std::invalid_argument("adam_step: step counter starts at 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double update = cfg.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    param[i] = static_cast<T>(static_cast<double>(param[i]) - update);
  }
}

template <typename T>
Adam<T>::Adam(std::vector<ParameterRef<T>> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
void Adam<T>::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (!p.trainable || !p.tensor.has_grad()) continue;
    auto grad = p.tensor.grad_data();
    adam_step<T>(p.tensor.mutable_data(), grad, m_[i], v_[i], step_, cfg_);
  }
}

template <typename T>
std::size_t Adam<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.trainable;
  return n;
}

template void adam_step<float>(std::span<float>, std::span<const float>, std::span<double>,
                               std::span<double>, std::uint64_t, const AdamConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>, std::span<double>,
                                std::span<double>, std::uint64_t, const AdamConfig&);
template class Adam<float>;
template class Adam<double>;

}  // namespace rpgan::train
