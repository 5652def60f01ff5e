// SPDX-License-Identifier: Apache-2.0
#pragma once

// Glue between a RunConfig and the library: datasets, architectures and the
// checkpoint layout shared by every subcommand.

#include <filesystem>
#include <optional>

#include "config.hpp"
#include "rpgan/io/checkpoint.hpp"
#include "rpgan/io/dataset.hpp"
#include "rpgan/train/discriminator.hpp"
#include "rpgan/train/trainer.hpp"

namespace rpgan::cli {

/// nullopt when data.source = none.
std::optional<io::Dataset> load_data(const RunConfig& cfg, Rng& rng);

/// Per-sample shape the generator must produce for this config.
Shape output_shape(const RunConfig& cfg, const std::optional<io::Dataset>& data);

GeneratorArch build_arch(const RunConfig& cfg, const Shape& out_shape);
train::DiscriminatorArch build_disc_arch(const RunConfig& cfg, const Shape& out_shape);
train::TrainConfig build_train_config(const RunConfig& cfg);

/// A loaded model file: the generator, the discriminator when one was
/// stored, and the config it was trained with.
struct Model {
  io::Checkpoint ckpt;
  Generator<float> gen;
  std::optional<train::Discriminator<float>> disc;
  RunConfig cfg;
};

Model load_model(const std::filesystem::path& path);

/// Stores the config under "cfg." keys.
void put_config(io::Checkpoint& ckpt, const RunConfig& cfg);
RunConfig get_config(const io::Checkpoint& ckpt);

/// Ring centers for a ring config, for mode-coverage reports.
bool is_ring(const RunConfig& cfg);

}  // namespace rpgan::cli
