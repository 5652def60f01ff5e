// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "rpgan/core/generator.hpp"
#include "rpgan/io/dataset.hpp"
#include "rpgan/train/discriminator.hpp"
#include "rpgan/train/trainer.hpp"

namespace rpgan::lifecycle {

enum class InitMode { Random, ClonePerturb };

std::string_view to_string(InitMode mode);
InitMode parse_init_mode(std::string_view text);

/// Instances to append per bucket and how to initialize them.
struct ExtensionSpec {
  std::vector<std::size_t> added;
  InitMode init = InitMode::Random;
  /// ClonePerturb: noise std relative to the RMS of each copied tensor.
  double perturb = 0.1;
  bool freeze_old = true;
  bool freeze_z = true;

  /// Throws std::invalid_argument unless there is one count per bucket and
  /// at least one is positive.
  void validate(std::size_t bucket_count) const;
};

/// Appends new instances at the end of each bucket. Existing instances and
/// Z are shared with `gen`, so every old route renders the same image.
template <typename T>
Generator<T> extend(const Generator<T>& gen, const ExtensionSpec& spec, Rng& rng);

/// Trains with the generator's current trainability flags. Throws
/// ContractError when no generator parameter is trainable.
template <typename T>
train::TrainReport incremental_train(Generator<T>& gen, train::Discriminator<T>& disc,
                                     const io::Dataset& data, const train::TrainConfig& cfg);

/// FNV-1a over the raw bytes of every non-trainable generator parameter
/// (names included), in parameter order.
template <typename T>
std::uint64_t frozen_checksum(const Generator<T>& gen);

}  // namespace rpgan::lifecycle
