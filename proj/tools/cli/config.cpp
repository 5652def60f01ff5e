// SPDX-License-Identifier: Apache-2.0
#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "rpgan/io/errors.hpp"

namespace rpgan::cli {

const std::vector<KeySpec>& config_schema() {
  static const std::vector<KeySpec> schema = {
      {"run.seed", "0", "seed for data, initialization and training"},
      {"run.out", "out", "output directory"},
      {"model.kind", "mlp", "mlp | conv | linear"},
      {"model.instances", "8,8,4", "instances per bucket (one entry per bucket)"},
      {"model.z_dim", "16", "size of the learnable input Z (mlp, conv)"},
      {"model.hidden", "64", "hidden width (mlp)"},
      {"model.channels", "64", "feature channels (conv)"},
      {"model.widths", "128,128,256,512,1024,784", "layer widths including Z (linear)"},
      {"model.out_shape", "", "per-sample output reshape such as 1x28x28 (linear)"},
      {"model.bias", "1", "fully-connected biases (linear)"},
      {"data.source", "ring", "ring | idx | none (untrained model, train.steps = 0)"},
      {"data.modes", "8", "ring: number of Gaussian modes"},
      {"data.radius", "0.75", "ring: radius of the mode centers"},
      {"data.sigma", "0.05", "ring: per-mode standard deviation"},
      {"data.samples", "20000", "ring: dataset size"},
      {"data.images", "", "idx: image file"},
      {"data.labels", "", "idx: optional label file"},
      {"data.colorize", "0", "idx: tint every digit with a random hue"},
      {"data.max_label", "", "keep only samples whose label is below this value"},
      {"train.loss", "hinge-sn", "hinge-sn | wgan-penalty"},
      {"train.steps", "1000", "generator updates"},
      {"train.d_steps", "5", "discriminator updates per generator update"},
      {"train.batch", "64", "batch size"},
      {"train.lr", "0.00025", "Adam learning rate"},
      {"train.beta1", "0.5", "Adam beta1"},
      {"train.beta2", "0.999", "Adam beta2"},
      {"train.diversity_weight", "1", "weight of the diversity loss"},
      {"train.penalty_coef", "10", "gradient-penalty coefficient (wgan-penalty)"},
      {"disc.channels", "", "discriminator conv channels (images only)"},
      {"disc.hidden", "64,64", "discriminator dense widths"},
  };
  return schema;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::vector<std::size_t> parse_sizes(const std::string& key, const std::string& text, char sep) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(parse_u64(key, trim(item)));
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_schema()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
  explicit_.insert(key);
}

void RunConfig::overlay(const RunConfig& other) {
  for (const auto& key : other.explicit_) set(key, other.get(key));
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::stringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(n);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'section.key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (cfg.values_.find(key) == cfg.values_.end()) {
      throw ConfigError(where + ": unknown config key '" + key + "'");
    }
    if (!seen.insert(key).second) throw ConfigError(where + ": key '" + key + "' set twice");
    cfg.set(key, value);
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const io::IoError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  return parse(text, path.string());
}

std::uint64_t RunConfig::u64(const std::string& key) const { return parse_u64(key, get(key)); }

double RunConfig::real(const std::string& key) const {
  const std::string& text = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError(key + ": expected 0 or 1, got '" + v + "'");
}

std::vector<std::size_t> RunConfig::sizes(const std::string& key) const {
  return parse_sizes(key, get(key), ',');
}

std::vector<std::size_t> RunConfig::shape(const std::string& key) const {
  return parse_sizes(key, get(key), 'x');
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string schema_help() {
  std::string out = "Config keys (section.key = value):\n";
  for (const auto& k : config_schema()) {
    std::string line = "  " + k.key;
    line.resize(std::max<std::size_t>(line.size() + 1, 28), ' ');
    out += line + k.help + (k.default_value.empty() ? "" : " [" + k.default_value + "]") + "\n";
  }
  return out;
}

}  // namespace rpgan::cli
