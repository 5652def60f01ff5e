// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rpgan/core/generator.hpp"

namespace rpgan::train {

struct AdamConfig {
  double lr = 2.5e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `param` at step `t` (1-based).
template <typename T>
void adam_step(std::span<T> param, std::span<const T> grad, std::span<double> m,
               std::span<double> v, std::uint64_t t, const AdamConfig& cfg);

/// Adam over a fixed parameter list. Parameters flagged non-trainable are
/// never touched, and their moments stay zero.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ParameterRef<T>> params, AdamConfig cfg);

  void zero_grad();
  /// Applies the accumulated leaf gradients, then increments the step.
  void step();

  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<ParameterRef<T>>& params() const { return params_; }
  std::size_t trainable_count() const;

  // Moment access for checkpointing.
  std::vector<double>& first_moment(std::size_t i) { return m_[i]; }
  std::vector<double>& second_moment(std::size_t i) { return v_[i]; }
  void set_steps(std::uint64_t s) { step_ = s; }

 private:
  std::vector<ParameterRef<T>> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t step_ = 0;
};

}  // namespace rpgan::train
