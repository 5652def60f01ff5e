// SPDX-License-Identifier: Apache-2.0
#include "rpgan/train/losses.hpp"

#include "rpgan/autodiff/ops.hpp"
#include "rpgan/autodiff/tape.hpp"

namespace rpgan::train {

template <typename T>
GanLosses<T> hinge_losses(const ad::Tensor<T>& d_real, const ad::Tensor<T>& d_fake) {
  auto real_term = ad::mean(ad::relu(ad::add_scalar(ad::neg(d_real), T(1))));
  auto fake_term = ad::mean(ad::relu(ad::add_scalar(d_fake, T(1))));
  return {ad::add(real_term, fake_term), ad::neg(ad::mean(d_fake))};
}

template <typename T>
GanLosses<T> wgan_penalty_losses(const ad::Tensor<T>& d_real, const ad::Tensor<T>& d_fake,
                                 const ad::Tensor<T>& penalty, T coef) {
  auto d = ad::add(ad::sub(ad::mean(d_fake), ad::mean(d_real)), ad::scale(penalty, coef));
  return {d, ad::neg(ad::mean(d_fake))};
}

template <typename T>
ad::Tensor<T> gradient_penalty(const Critic<T>& critic, const ad::Tensor<T>& real,
                               const ad::Tensor<T>& fake, std::span<const T> alpha) {
  if (real.shape() != fake.shape()) {
    throw ad::ShapeError("gradient_penalty: real " + ad::to_string(real.shape()) + " vs fake " +
                         ad::to_string(fake.shape()));
  }
  const std::size_t n = real.dim(0), width = real.numel() / n;
  if (alpha.size() != n) throw ad::ShapeError("gradient_penalty needs one mixing weight per sample");
  std::vector<T> mixed(real.numel());
  auto r = real.data(), f = fake.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t k = i * width + j;
      mixed[k] = alpha[i] * r[k] + (T(1) - alpha[i]) * f[k];
    }
  ad::EnableGradGuard record;
  ad::Tensor<T> x_hat(real.shape(), std::move(mixed), true);
  auto scores = critic(x_hat);
  auto g = ad::gradients(ad::sum(scores), {x_hat}, true).front();
  auto norms = ad::sqrt(ad::add_scalar(ad::row_sums(ad::square(g)), T(1e-12)));
  return ad::mean(ad::square(ad::add_scalar(norms, T(-1))));
}

template <typename T>
ad::Tensor<T> gradient_penalty(const Critic<T>& critic, const ad::Tensor<T>& real,
                               const ad::Tensor<T>& fake, Rng& rng) {
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<T> alpha(real.rank() ? real.dim(0) : 0);
  for (auto& a : alpha) a = static_cast<T>(uniform(rng));
  return gradient_penalty<T>(critic, real, fake, std::span<const T>(alpha));
}

#define RPGAN_INSTANTIATE_LOSSES(T)                                                          \
  template GanLosses<T> hinge_losses(const ad::Tensor<T>&, const ad::Tensor<T>&);            \
  template GanLosses<T> wgan_penalty_losses(const ad::Tensor<T>&, const ad::Tensor<T>&,      \
                                            const ad::Tensor<T>&, T);                         \
  template ad::Tensor<T> gradient_penalty(const Critic<T>&, const ad::Tensor<T>&,            \
                                          const ad::Tensor<T>&, std::span<const T>);         \
  template ad::Tensor<T> gradient_penalty(const Critic<T>&, const ad::Tensor<T>&,            \
                                          const ad::Tensor<T>&, Rng&);
RPGAN_INSTANTIATE_LOSSES(float)
RPGAN_INSTANTIATE_LOSSES(double)

}  // namespace rpgan::train
