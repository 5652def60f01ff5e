// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "rpgan/core/generator.hpp"
#include "rpgan/io/checkpoint.hpp"
#include "rpgan/train/spectral.hpp"

namespace rpgan::train {

/// Stride-2 4x4 convolutions (image inputs only), then fully-connected
/// hidden layers, then a linear score. LeakyReLU(0.2) throughout.
struct DiscriminatorArch {
  Shape input_shape;                  // per sample: [2] or [C,H,W]
  std::vector<std::size_t> channels;  // conv output channels
  std::vector<std::size_t> hidden;    // dense widths

  /// Flattened width entering the first dense layer; throws ShapeError.
  std::size_t flat_features() const;
  friend bool operator==(const DiscriminatorArch&, const DiscriminatorArch&) = default;
};

template <typename T>
class Discriminator {
 public:
  static Discriminator create(const DiscriminatorArch& arch, Rng& rng);

  /// Scores, shape [N]. With `training`, spectral-norm vectors are refined.
  Tensor<T> forward(const Tensor<T>& x, bool training = false);
  /// Activations feeding the final score layer, [N, F].
  Tensor<T> features(const Tensor<T>& x) const;

  bool spectral_norm() const { return spectral_norm_; }
  void set_spectral_norm(bool on) { spectral_norm_ = on; }
  /// Set once adversarial training has run; feature-based metrics need it.
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

  const DiscriminatorArch& arch() const { return arch_; }
  std::vector<ParameterRef<T>> parameters() const;
  Parameter<T>& param(const std::string& name);
  std::vector<SpectralState>& spectral_states() { return sn_; }

 private:
  Tensor<T> trunk(const Tensor<T>& x, bool training) const;
  Tensor<T> weight(std::size_t layer, bool training) const;

  DiscriminatorArch arch_;
  // weight, bias pairs: convs, hidden, then the score layer
  std::vector<Parameter<T>> params_;
  mutable std::vector<SpectralState> sn_;  // refined only by training forwards
  bool spectral_norm_ = true;
  bool trained_ = false;
};

void put_discriminator(io::Checkpoint& ckpt, Discriminator<float>& disc,
                       const std::string& prefix = "disc.");
Discriminator<float> get_discriminator(const io::Checkpoint& ckpt,
                                       const std::string& prefix = "disc.");

}  // namespace rpgan::train
