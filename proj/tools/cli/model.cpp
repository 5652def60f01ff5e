// SPDX-License-Identifier: Apache-2.0
#include "model.hpp"

#include "rpgan/io/errors.hpp"
#include "rpgan/io/idx.hpp"

namespace rpgan::cli {

bool is_ring(const RunConfig& cfg) { return cfg.str("data.source") == "ring"; }

std::optional<io::Dataset> load_data(const RunConfig& cfg, Rng& rng) {
  const std::string source = cfg.str("data.source");
  io::Dataset data;
  if (source == "none") {
    return std::nullopt;
  } else if (source == "ring") {
    const std::size_t modes = cfg.size("data.modes");
    const std::size_t n = cfg.size("data.samples");
    if (modes == 0 || n == 0) throw ConfigError("data.modes and data.samples must be >= 1");
    data = io::synth_mixture(modes, cfg.real("data.radius"), cfg.real("data.sigma"), n, rng);
  } else if (source == "idx") {
    if (!cfg.is_set("data.images")) throw ConfigError("data.images: required when data.source = idx");
    const std::filesystem::path images = cfg.str("data.images");
    if (!std::filesystem::exists(images)) {
      throw ConfigError("data.images: no such file '" + images.string() + "'");
    }
    std::optional<std::filesystem::path> labels;
    if (cfg.is_set("data.labels")) {
      labels = cfg.str("data.labels");
      if (!std::filesystem::exists(*labels)) {
        throw ConfigError("data.labels: no such file '" + labels->string() + "'");
      }
    }
    data = io::load_idx(images, labels);
    if (cfg.flag("data.colorize")) data = io::colorize(data, rng);
  } else {
    throw ConfigError("data.source: expected ring, idx or none, got '" + source + "'");
  }
  if (cfg.is_set("data.max_label")) {
    if (data.labels.empty()) throw ConfigError("data.max_label: the dataset has no labels");
    const auto limit = static_cast<int>(cfg.u64("data.max_label"));
    data = data.filter([limit](int label) { return label < limit; });
    if (data.size() == 0) throw ConfigError("data.max_label: no sample has a label below " + std::to_string(limit));
  }
  return data;
}

Shape output_shape(const RunConfig& cfg, const std::optional<io::Dataset>& data) {
  if (data) return data->sample_shape;
  if (cfg.str("model.kind") == "linear") {
    const auto widths = cfg.sizes("model.widths");
    auto shape = cfg.shape("model.out_shape");
    if (shape.empty() && !widths.empty()) shape = {widths.back()};
    return shape;
  }
  if (cfg.str("model.kind") == "mlp") return {2};
  throw ConfigError("data.source = none needs model.kind = linear or mlp");
}

GeneratorArch build_arch(const RunConfig& cfg, const Shape& out) {
  const std::string kind = cfg.str("model.kind");
  const auto m = cfg.sizes("model.instances");
  if (m.empty()) throw ConfigError("model.instances: at least one bucket is required");
  for (auto v : m)
    if (v == 0) throw ConfigError("model.instances: every bucket needs at least one instance");
  GeneratorArch arch;
  arch.instances = m;
  arch.output_activation = Activation::Tanh;
  const std::size_t n = m.size();
  if (kind == "mlp") {
    if (n < 2) throw ConfigError("model.instances: the mlp generator needs at least two buckets");
    const std::size_t z = cfg.size("model.z_dim"), h = cfg.size("model.hidden");
    const std::size_t features = ad::numel(out);
    arch.z_shape = {z};
    for (std::size_t b = 0; b + 1 < n; ++b)
      arch.layers.push_back(LayerSpec::fully_connected(b == 0 ? z : h, h, Activation::ReLU));
    arch.layers.push_back(LayerSpec::fully_connected(h, features, Activation::Identity,
                                                     out.size() > 1 ? out : Shape{}));
  } else if (kind == "conv") {
    if (n < 3) throw ConfigError("model.instances: the conv generator needs at least three buckets");
    if (out.size() != 3 || out[1] != out[2]) {
      throw ConfigError("model.kind = conv needs square CxHxW data, got " + ad::to_string(out));
    }
    const std::size_t ups = n - 2, side = out[1];
    if (side % (std::size_t{1} << ups) != 0) {
      throw ConfigError("model.instances: " + std::to_string(ups) + " upsampling buckets do not divide image side " +
                        std::to_string(side));
    }
    const std::size_t s0 = side >> ups, ch = cfg.size("model.channels"), z = cfg.size("model.z_dim");
    arch.z_shape = {z};
    arch.layers.push_back(LayerSpec::fully_connected(z, ch * s0 * s0, Activation::Identity, {ch, s0, s0}));
    for (std::size_t b = 0; b < ups; ++b) arch.layers.push_back(LayerSpec::residual(ch, ch, Activation::ReLU, true));
    arch.layers.push_back(LayerSpec::output_conv(ch, out[0], Activation::ReLU));
  } else if (kind == "linear") {
    const auto widths = cfg.sizes("model.widths");
    if (widths.size() != n + 1) {
      throw ConfigError("model.widths: " + std::to_string(widths.size()) + " widths need " +
                        std::to_string(widths.size() - 1) + " buckets in model.instances, got " + std::to_string(n));
    }
    if (widths.back() != ad::numel(out)) {
      throw ConfigError("model.widths: last width " + std::to_string(widths.back()) + " does not match data of shape " +
                        ad::to_string(out));
    }
    arch.z_shape = {widths[0]};
    for (std::size_t b = 0; b < n; ++b) {
      auto spec = LayerSpec::fully_connected(widths[b], widths[b + 1], Activation::Identity,
                                             b + 1 == n && out.size() > 1 ? out : Shape{});
      spec.bias = cfg.flag("model.bias");
      arch.layers.push_back(spec);
    }
  } else {
    throw ConfigError("model.kind: expected mlp, conv or linear, got '" + kind + "'");
  }
  try {
    arch.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return arch;
}

train::DiscriminatorArch build_disc_arch(const RunConfig& cfg, const Shape& out) {
  train::DiscriminatorArch arch{out, cfg.sizes("disc.channels"), cfg.sizes("disc.hidden")};
  if (!arch.channels.empty() && out.size() != 3) throw ConfigError("disc.channels: only image data has channels");
  try {
    arch.flat_features();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("disc: ") + e.what());
  }
  return arch;
}

train::TrainConfig build_train_config(const RunConfig& cfg) {
  train::TrainConfig t;
  try {
    t.loss = train::parse_loss_variant(cfg.str("train.loss"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train.loss: ") + e.what());
  }
  t.steps = cfg.size("train.steps");
  t.d_steps = cfg.size("train.d_steps");
  t.batch = cfg.size("train.batch");
  t.lr = cfg.real("train.lr");
  t.beta1 = cfg.real("train.beta1");
  t.beta2 = cfg.real("train.beta2");
  t.diversity_weight = cfg.real("train.diversity_weight");
  t.penalty_coef = cfg.real("train.penalty_coef");
  t.seed = cfg.u64("run.seed");
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return t;
}

// run.out is left out so that a checkpoint does not depend on where it was written.
void put_config(io::Checkpoint& ckpt, const RunConfig& cfg) {
  for (const auto& [k, v] : cfg.values())
    if (k != "run.out") ckpt.meta["cfg." + k] = v;
}

RunConfig get_config(const io::Checkpoint& ckpt) {
  RunConfig cfg;
  for (const auto& [k, v] : ckpt.meta)
    if (k.starts_with("cfg.")) cfg.set(k.substr(4), v);
  return cfg;
}

Model load_model(const std::filesystem::path& path) {
  io::Checkpoint ckpt;
  try {
    ckpt = io::load_checkpoint(path);
  } catch (const io::IoError& e) {
    throw ConfigError(std::string("--checkpoint: ") + e.what());
  }
  auto gen = io::get_generator(ckpt);
  std::optional<train::Discriminator<float>> disc;
  if (ckpt.meta.count("disc.input_shape")) disc = train::get_discriminator(ckpt);
  auto cfg = get_config(ckpt);
  return Model{std::move(ckpt), std::move(gen), std::move(disc), std::move(cfg)};
}

}  // namespace rpgan::cli
