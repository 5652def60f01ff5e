// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "rpgan/core/generator.hpp"
#include "rpgan/io/csv.hpp"
#include "rpgan/io/dataset.hpp"
#include "rpgan/train/discriminator.hpp"
#include "rpgan/train/optim.hpp"

namespace rpgan::train {

enum class LossVariant { HingeSN, WganPenalty };

std::string_view to_string(LossVariant v);
LossVariant parse_loss_variant(std::string_view text);

struct TrainConfig {
  LossVariant loss = LossVariant::HingeSN;
  double lr = 2.5e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::size_t d_steps = 5;
  std::size_t batch = 64;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  double diversity_weight = 1.0;
  double penalty_coef = 10.0;

  AdamConfig adam() const { return {lr, beta1, beta2, 1e-8}; }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct TrainRow {
  std::size_t step;
  double loss_d;
  double loss_g;
  double diversity;
};

struct TrainReport {
  std::vector<TrainRow> rows;
  /// Generator-step route usage, [bucket][instance].
  std::vector<std::vector<std::uint64_t>> route_counts;

  /// step,loss_d,loss_g,diversity_term
  io::CsvWriter loss_csv() const;
  /// bucket,instance,count
  io::CsvWriter route_csv() const;
};

/// A loss became NaN or infinite; training stopped at `step`.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::size_t step, double loss_d, double loss_g);
  std::size_t step;
  double loss_d;
  double loss_g;
};

/// Alternates cfg.d_steps discriminator updates with one generator update.
/// The generator loss is the adversarial term plus
/// diversity_weight * diversity_loss. Only parameters flagged trainable when
/// the trainer is constructed are updated.
template <typename T>
class Trainer {
 public:
  Trainer(Generator<T>& gen, Discriminator<T>& disc, const io::Dataset& data, TrainConfig cfg);

  /// Runs `steps` generator updates (cfg.steps when omitted).
  TrainReport run();
  TrainReport run(std::size_t steps);

  Adam<T>& gen_optimizer() { return gen_opt_; }
  Adam<T>& disc_optimizer() { return disc_opt_; }
  std::size_t steps_done() const { return done_; }

 private:
  Tensor<T> discriminator_step();

  Generator<T>& gen_;
  Discriminator<T>& disc_;
  const io::Dataset& data_;
  TrainConfig cfg_;
  Rng rng_;
  Adam<T> gen_opt_;
  Adam<T> disc_opt_;
  std::size_t done_ = 0;
};

template <typename T>
TrainReport train(Generator<T>& gen, Discriminator<T>& disc, const io::Dataset& data,
                  const TrainConfig& cfg);

/// Moments and step counter under "<prefix>m.<param>", "<prefix>v.<param>".
void put_adam(io::Checkpoint& ckpt, Adam<float>& opt, const std::string& prefix);
/// Restores state saved by put_adam into an optimizer over the same parameters.
void get_adam(const io::Checkpoint& ckpt, Adam<float>& opt, const std::string& prefix);

}  // namespace rpgan::train
