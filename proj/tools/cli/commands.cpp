// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "config.hpp"
#include "model.hpp"
#include "rpgan/analysis/metrics.hpp"
#include "rpgan/analysis/responsibility.hpp"
#include "rpgan/autodiff/tape.hpp"
#include "rpgan/fusion/linear.hpp"
#include "rpgan/io/csv.hpp"
#include "rpgan/io/errors.hpp"
#include "rpgan/io/image.hpp"
#include "rpgan/kernels.hpp"
#include "rpgan/lifecycle/extend.hpp"
#include "rpgan/lifecycle/inverter.hpp"
#include "rpgan/train/modes.hpp"
#include "rpgan/train/trainer.hpp"

namespace rpgan::cli {

namespace fs = std::filesystem;

namespace {

/// Raised for post-condition failures (exit 4).
class VerificationFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluation draws use a stream separate from training.
constexpr std::uint64_t kEvalSalt = 0x5eed0fe7a1ULL;

fs::path prepare_out(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  return out;
}

// "key = value" lines for the flags of one invocation.
class Resolved {
 public:
  template <typename V>
  Resolved& add(const std::string& key, const V& value) {
    std::ostringstream s;
    s << value;
    lines_[key] = s.str();
    return *this;
  }
  void save(const fs::path& path) const {
    std::string text;
    for (const auto& [k, v] : lines_) text += k + " = " + v + "\n";
    io::write_text_atomic(path, text);
  }

 private:
  std::map<std::string, std::string> lines_;
};

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& flag, const std::string& text) {
  RunConfig scratch;
  scratch.set("model.instances", text);
  try {
    return scratch.sizes("model.instances");
  } catch (const ConfigError&) {
    throw ConfigError(flag + ": expected a comma-separated list of integers, got '" + text + "'");
  }
}

std::vector<double> parse_real_list(const std::string& flag, const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError(flag + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

bool is_image(const Shape& s) { return s.size() == 3; }

std::string image_ext(const Shape& s) { return s[0] == 3 ? ".ppm" : ".pgm"; }

// Image grid for image outputs; a CSV of values with their routes otherwise.
void write_samples(const fs::path& dir, const Shape& shape, const Tensor<float>& batch,
                   const std::vector<Route>& routes, std::size_t cols) {
  io::CsvWriter index({"sample", "route"});
  for (std::size_t i = 0; i < routes.size(); ++i) index.add_row({std::to_string(i), to_string(routes[i])});
  if (is_image(shape)) {
    io::write_grid(io::unbatch(batch), cols, dir / ("samples" + image_ext(shape)));
    index.save(dir / "routes.csv");
    return;
  }
  std::vector<std::string> header{"sample", "route"};
  const std::size_t width = ad::numel(shape);
  for (std::size_t j = 0; j < width; ++j) header.push_back("v" + std::to_string(j));
  io::CsvWriter csv(header);
  for (std::size_t i = 0; i < routes.size(); ++i) {
    std::vector<std::string> row{std::to_string(i), to_string(routes[i])};
    for (std::size_t j = 0; j < width; ++j) row.push_back(io::format_number(batch[i * width + j]));
    csv.add_row(row);
  }
  csv.save(dir / "samples.csv");
}

std::optional<train::ModeCoverage> ring_coverage(const RunConfig& cfg, const Generator<float>& gen,
                                                 std::uint64_t seed) {
  if (!is_ring(cfg) || gen.output_shape() != Shape{2}) return std::nullopt;
  Rng rng(seed ^ kEvalSalt);
  ad::NoGradGuard no_grad;
  auto [x, routes] = gen.batch_forward(2000, rng);
  return train::mode_coverage(x, io::ring_centers(cfg.size("data.modes"), cfg.real("data.radius")),
                              cfg.real("data.sigma"));
}

void add_coverage(io::CsvWriter& metrics, const std::optional<train::ModeCoverage>& cov) {
  if (!cov) return;
  metrics.add_row({"modes_covered", std::to_string(cov->covered)});
  metrics.add_row({"high_quality", io::format_number(cov->high_quality)});
  for (std::size_t k = 0; k < cov->counts.size(); ++k)
    metrics.add_row({"mode_" + std::to_string(k), std::to_string(cov->counts[k])});
}

struct TrainedRun {
  io::Checkpoint ckpt;
  train::TrainReport report;
  Generator<float> gen;
  std::optional<train::ModeCoverage> coverage;
};

TrainedRun train_model(const RunConfig& cfg) {
  const std::uint64_t seed = cfg.u64("run.seed");
  Rng rng(seed);
  auto data = load_data(cfg, rng);
  const Shape shape = output_shape(cfg, data);
  const auto arch = build_arch(cfg, shape);
  const auto tc = build_train_config(cfg);
  auto gen = Generator<float>::create(arch, rng);
  auto disc = train::Discriminator<float>::create(build_disc_arch(cfg, shape), rng);

  io::Checkpoint ckpt;
  ckpt.seed = seed;
  put_config(ckpt, cfg);
  train::TrainReport report;
  if (data) {
    train::Trainer<float> trainer(gen, disc, *data, tc);
    report = trainer.run();
    train::put_adam(ckpt, trainer.gen_optimizer(), "opt.gen.");
    train::put_adam(ckpt, trainer.disc_optimizer(), "opt.disc.");
  } else if (tc.steps > 0) {
    throw ConfigError("train.steps: data.source = none only builds an untrained model (set train.steps = 0)");
  }
  io::put_generator(ckpt, gen);
  train::put_discriminator(ckpt, disc);
  ckpt.counters["train.steps"] = tc.steps;
  auto coverage = ring_coverage(cfg, gen, seed);
  return {std::move(ckpt), std::move(report), std::move(gen), coverage};
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> steps;
};

RunConfig resolve_config(const std::string& path, const std::optional<std::uint64_t>& seed,
                         const std::optional<std::string>& out, const std::optional<std::size_t>& steps) {
  RunConfig cfg = RunConfig::load(path);
  if (seed) cfg.set("run.seed", std::to_string(*seed));
  if (out) cfg.set("run.out", *out);
  if (steps) cfg.set("train.steps", std::to_string(*steps));
  return cfg;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = resolve_config(a.config, a.seed, a.out, a.steps);
  const fs::path dir = prepare_out(cfg.str("run.out"));
  auto run = train_model(cfg);
  io::write_text_atomic(dir / "config.resolved", cfg.resolved());
  io::save_checkpoint(run.ckpt, dir / "model.rpgn");
  run.report.loss_csv().save(dir / "loss.csv");
  run.report.route_csv().save(dir / "routes_used.csv");
  io::CsvWriter metrics({"key", "value"});
  metrics.add_row({"steps", std::to_string(run.report.rows.size())});
  add_coverage(metrics, run.coverage);
  metrics.save(dir / "metrics.csv");
  {
    Rng rng(cfg.u64("run.seed") ^ kEvalSalt);
    ad::NoGradGuard no_grad;
    auto [batch, routes] = run.gen.batch_forward(64, rng);
    write_samples(dir, run.gen.output_shape(), batch, routes, 8);
  }
  out << "trained " << run.report.rows.size() << " steps; latent cardinality "
      << latent_cardinality(run.gen).str();
  if (run.coverage) out << "; modes covered " << run.coverage->covered << "/" << run.coverage->counts.size();
  out << "\nwrote " << (dir / "model.rpgn").string() << "\n";
  return kOk;
}

// -------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::string checkpoint;
  std::string metric = "color";
  std::size_t routes = 100;
  std::size_t per_bucket = 4;
  std::uint64_t seed = 0;
  std::string out = "analysis";
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
  auto model = load_model(a.checkpoint);
  analysis::Metric metric;
  try {
    metric = analysis::parse_metric(a.metric);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--metric: ") + e.what());
  }
  if (a.routes == 0 || a.per_bucket < 2) throw ConfigError("--routes must be >= 1 and --per-bucket >= 2");
  for (std::size_t b = 0; b < model.gen.bucket_count(); ++b) {
    if (model.gen.bucket(b).size() < a.per_bucket) {
      throw ConfigError("--per-bucket " + std::to_string(a.per_bucket) + ": bucket " + std::to_string(b + 1) +
                        " has only " + std::to_string(model.gen.bucket(b).size()) + " instances");
    }
  }
  const auto fn = analysis::make_metric<float>(metric, model.disc ? &*model.disc : nullptr);
  const fs::path dir = prepare_out(a.out);
  Resolved()
      .add("checkpoint", a.checkpoint)
      .add("metric", a.metric)
      .add("routes", a.routes)
      .add("per_bucket", a.per_bucket)
      .add("seed", a.seed)
      .save(dir / "analyze.resolved");
  Rng rng(a.seed);
  const auto report = analysis::diversity_ratio(model.gen, fn, std::string(analysis::to_string(metric)),
                                                a.routes, a.per_bucket, rng);
  report.to_csv().save(dir / "diversity.csv");
  const Shape& shape = model.gen.output_shape();
  if (is_image(shape)) {
    // One row per varied bucket around a single base route.
    ad::NoGradGuard no_grad;
    const Route base = model.gen.sample_route(rng);
    std::vector<Tensor<float>> grid;
    for (std::size_t b = 0; b < model.gen.bucket_count(); ++b) {
      auto row = analysis::freeze_and_vary(model.gen, {base, b, {}}, a.per_bucket, rng);
      grid.insert(grid.end(), row.begin(), row.end());
    }
    io::write_grid(grid, a.per_bucket, dir / ("buckets" + image_ext(shape)));
  }
  out << "routes used " << report.routes_used << ", skipped " << report.routes_skipped << "\n";
  for (const auto& r : report.ratios)
    out << "bucket " << r.bucket + 1 << ": D = " << io::format_number(r.mean) << " +- "
        << io::format_number(r.std) << "\n";
  return kOk;
}

// ----------------------------------------------------------------- fuse

struct FuseArgs {
  std::string checkpoint;
  std::string range;
  std::size_t count = 0;
  std::size_t batch = 64;
  std::size_t reps = 30;
  double tolerance = -1.0;
  std::uint64_t seed = 0;
  std::string out = "fused";
};

std::pair<std::size_t, std::size_t> parse_range(const std::string& text, std::size_t buckets) {
  const auto dots = text.find("..");
  std::size_t a = 0, b = 0;
  try {
    if (dots == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    a = std::stoul(text.substr(0, dots), &used);
    if (used != dots) throw std::invalid_argument(text);
    const std::string tail = text.substr(dots + 2);
    b = std::stoul(tail, &used);
    if (used != tail.size()) throw std::invalid_argument(text);
  } catch (const std::logic_error&) {
    throw ConfigError("--range: expected a..b with 1-based bucket numbers, got '" + text + "'");
  }
  if (a < 1 || a > b || b > buckets) {
    throw ConfigError("--range " + text + ": buckets are numbered 1.." + std::to_string(buckets));
  }
  return {a - 1, b - 1};
}

int cmd_fuse(const FuseArgs& a, std::ostream& out) {
  auto model = load_model(a.checkpoint);
  const auto [first, last] = parse_range(a.range, model.gen.bucket_count());
  if (a.count == 0) throw ConfigError("--count must be >= 1");
  if (a.batch == 0 || a.reps == 0) throw ConfigError("--batch and --reps must be >= 1");
  const double tol = a.tolerance >= 0 ? a.tolerance : fusion::default_tolerance<float>();
  Rng rng(a.seed);
  const auto plan = fusion::FusionPlan::random(model.gen.instance_counts(), first, last, a.count, rng);
  Generator<float> fused = model.gen;
  try {
    fused = fusion::fuse_buckets(model.gen, plan);
  } catch (const fusion::FusionError& e) {
    std::string reason = e.what();
    reason = reason.substr(reason.find(": ") + 2);
    throw ConfigError("--range " + a.range + ": bucket " + std::to_string(e.bucket() + 1) + " " + reason);
  }
  const fs::path dir = prepare_out(a.out);
  Resolved()
      .add("checkpoint", a.checkpoint)
      .add("range", a.range)
      .add("count", a.count)
      .add("batch", a.batch)
      .add("reps", a.reps)
      .add("tolerance", io::format_number(tol))
      .add("seed", a.seed)
      .save(dir / "fuse.resolved");
  fusion::BenchReport report;
  try {
    report = fusion::benchmark_fusion(model.gen, fused, plan, a.batch, a.reps, rng, tol);
  } catch (const fusion::VerificationError& e) {
    throw VerificationFailure(e.what());
  }
  io::Checkpoint ckpt = model.ckpt;
  ckpt.optimizer.clear();
  std::erase_if(ckpt.counters, [](const auto& kv) { return kv.first.starts_with("opt."); });
  io::put_generator(ckpt, fused);
  ckpt.meta["fusion.range"] = a.range;
  std::string selection;
  for (const auto& t : plan.selection) selection += (selection.empty() ? "" : ";") + to_string(Route{t});
  ckpt.meta["fusion.selection"] = selection;
  io::save_checkpoint(ckpt, dir / "fused.rpgn");
  report.to_csv().save(dir / "bench.csv");
  out << "instances " << join_sizes(model.gen.instance_counts()) << " -> " << join_sizes(fused.instance_counts())
      << "\nmax abs diff " << io::format_number(report.max_abs_diff) << "; multiply-adds over the range "
      << report.macs_composed << " -> " << report.macs_fused << " (x" << io::format_number(report.mac_ratio())
      << "); measured speedup x" << io::format_number(report.speedup()) << "\n";
  return kOk;
}

// --------------------------------------------------------------- extend

struct ExtendArgs {
  std::string checkpoint;
  std::string add;
  std::string init = "random";
  double perturb = 0.1;
  bool unfreeze_z = false;
  std::optional<std::string> config;
  std::size_t steps = 0;
  std::uint64_t seed = 0;
  std::string out = "extended";
};

int cmd_extend(const ExtendArgs& a, std::ostream& out) {
  auto model = load_model(a.checkpoint);
  lifecycle::ExtensionSpec spec;
  spec.added = parse_size_list("--add", a.add);
  try {
    spec.init = lifecycle::parse_init_mode(a.init);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--init: ") + e.what());
  }
  spec.perturb = a.perturb;
  spec.freeze_z = !a.unfreeze_z;
  Rng rng(a.seed);
  auto big = lifecycle::extend(model.gen, spec, rng);
  const auto before = lifecycle::frozen_checksum(big);

  RunConfig cfg = model.cfg;
  if (a.config) cfg.overlay(RunConfig::load(*a.config));
  cfg.set("run.seed", std::to_string(a.seed));
  cfg.set("train.steps", std::to_string(a.steps));
  cfg.set("model.instances", join_sizes(big.instance_counts()));
  const fs::path dir = prepare_out(a.out);
  cfg.set("run.out", a.out);
  io::write_text_atomic(dir / "config.resolved", cfg.resolved());
  Resolved()
      .add("checkpoint", a.checkpoint)
      .add("add", a.add)
      .add("init", a.init)
      .add("perturb", a.perturb)
      .add("unfreeze_z", a.unfreeze_z)
      .add("steps", a.steps)
      .add("seed", a.seed)
      .save(dir / "extend.resolved");

  io::Checkpoint ckpt;
  ckpt.seed = a.seed;
  put_config(ckpt, cfg);
  io::CsvWriter metrics({"key", "value"});
  auto disc = model.disc;
  if (a.steps > 0) {
    auto data = load_data(cfg, rng);
    if (!data) throw ConfigError("data.source: incremental training needs a dataset");
    if (!disc) disc = train::Discriminator<float>::create(build_disc_arch(cfg, big.output_shape()), rng);
    auto report = lifecycle::incremental_train(big, *disc, *data, build_train_config(cfg));
    report.loss_csv().save(dir / "loss.csv");
    report.route_csv().save(dir / "routes_used.csv");
    if (lifecycle::frozen_checksum(big) != before) {
      throw VerificationFailure("frozen instance parameters changed during incremental training");
    }
  }
  io::put_generator(ckpt, big);
  if (disc) train::put_discriminator(ckpt, *disc);
  io::save_checkpoint(ckpt, dir / "extended.rpgn");
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(before));
  std::string shape_text = join_sizes(big.instance_counts());
  std::replace(shape_text.begin(), shape_text.end(), ',', 'x');
  metrics.add_row({"instances", shape_text});
  metrics.add_row({"frozen_checksum", hex});
  add_coverage(metrics, ring_coverage(cfg, big, a.seed));
  metrics.save(dir / "metrics.csv");
  out << "instances " << join_sizes(model.gen.instance_counts()) << " -> " << join_sizes(big.instance_counts())
      << "; frozen checksum " << hex << "\n";
  return kOk;
}

// --------------------------------------------------------------- invert

struct InvertArgs {
  std::string checkpoint;
  std::size_t samples = 5000;
  lifecycle::ClassifierConfig classifier;
  std::uint64_t seed = 0;
  std::string out = "inverter";
};

int cmd_invert(const InvertArgs& a, std::ostream& out) {
  auto model = load_model(a.checkpoint);
  const fs::path dir = prepare_out(a.out);
  Resolved()
      .add("checkpoint", a.checkpoint)
      .add("samples", a.samples)
      .add("epochs", a.classifier.epochs)
      .add("hidden", a.classifier.hidden)
      .add("channels", a.classifier.channels)
      .add("seed", a.seed)
      .save(dir / "invert.resolved");
  Rng rng(a.seed);
  const auto inv = lifecycle::train_inverter(model.gen, a.samples, a.classifier, rng);
  io::Checkpoint ckpt = model.ckpt;
  lifecycle::put_inverter(ckpt, inv);
  io::save_checkpoint(ckpt, dir / "inverter.rpgn");
  inv.accuracy_csv().save(dir / "accuracy.csv");
  for (std::size_t b = 0; b < inv.accuracy.size(); ++b)
    out << "bucket " << b + 1 << ": accuracy " << io::format_number(inv.accuracy[b]) << " (chance "
        << io::format_number(1.0 / static_cast<double>(inv.classifiers[b].classes())) << ")\n";
  return kOk;
}

// ------------------------------------------------------------- generate

struct GenerateArgs {
  std::string checkpoint;
  std::size_t count = 64;
  std::size_t cols = 8;
  std::optional<std::string> route;
  std::optional<std::string> edit;
  std::uint64_t seed = 0;
  std::string out = "generated";
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  auto model = load_model(a.checkpoint);
  const auto counts = model.gen.instance_counts();
  std::vector<Route> routes;
  Rng rng(a.seed);
  if (a.route) {
    Route r;
    try {
      r = parse_route(*a.route);
      validate_route(r, counts);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("--route: ") + e.what());
    }
    routes.push_back(r);
    if (a.edit) {
      const auto colon = a.edit->find(':');
      std::size_t bucket = 0, index = 0;
      try {
        if (colon == std::string::npos) throw std::invalid_argument(*a.edit);
        bucket = std::stoul(a.edit->substr(0, colon));
        index = std::stoul(a.edit->substr(colon + 1));
      } catch (const std::logic_error&) {
        throw ConfigError("--edit: expected bucket:index with a 1-based bucket, got '" + *a.edit + "'");
      }
      if (bucket == 0 || bucket > counts.size()) {
        throw ConfigError("--edit: buckets are numbered 1.." + std::to_string(counts.size()));
      }
      if (index >= counts[bucket - 1]) {
        throw ConfigError("--edit: bucket " + std::to_string(bucket) + " has instances 0.." +
                          std::to_string(counts[bucket - 1] - 1));
      }
      routes.push_back(edit_route(r, bucket - 1, index, counts));
    }
  } else {
    if (a.edit) throw ConfigError("--edit needs --route");
    if (a.count == 0) throw ConfigError("--count must be >= 1");
    for (std::size_t i = 0; i < a.count; ++i) routes.push_back(model.gen.sample_route(rng));
  }
  if (a.cols == 0) throw ConfigError("--cols must be >= 1");
  const fs::path dir = prepare_out(a.out);
  Resolved()
      .add("checkpoint", a.checkpoint)
      .add("count", a.count)
      .add("cols", a.cols)
      .add("route", a.route.value_or(""))
      .add("edit", a.edit.value_or(""))
      .add("seed", a.seed)
      .save(dir / "generate.resolved");
  ad::NoGradGuard no_grad;
  const auto batch = model.gen.forward_batch(routes);
  write_samples(dir, model.gen.output_shape(), batch, routes, a.cols);
  out << "generated " << routes.size() << " samples in " << dir.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------- noise

struct NoiseArgs {
  std::string checkpoint;
  std::size_t bucket = 1;
  std::string sigmas = "0.01,0.1,1";
  std::size_t draws = 64;
  std::uint64_t seed = 0;
  std::string out = "noise";
};

int cmd_noise(const NoiseArgs& a, std::ostream& out) {
  auto model = load_model(a.checkpoint);
  if (a.bucket < 1 || a.bucket > model.gen.bucket_count()) {
    throw ConfigError("--bucket: buckets are numbered 1.." + std::to_string(model.gen.bucket_count()));
  }
  for (std::size_t b = 0; b < model.gen.bucket_count(); ++b) {
    if (model.gen.bucket(b).size() != 1) {
      throw ConfigError("noise needs one instance per bucket; bucket " + std::to_string(b + 1) + " has " +
                        std::to_string(model.gen.bucket(b).size()));
    }
  }
  if (a.draws == 0) throw ConfigError("--draws must be >= 1");
  const auto sigmas = parse_real_list("--sigmas", a.sigmas);
  for (double s : sigmas)
    if (!(s >= 0)) throw ConfigError("--sigmas: values must be >= 0");
  const fs::path dir = prepare_out(a.out);
  Resolved()
      .add("checkpoint", a.checkpoint)
      .add("bucket", a.bucket)
      .add("sigmas", a.sigmas)
      .add("draws", a.draws)
      .add("seed", a.seed)
      .save(dir / "noise.resolved");
  Rng rng(a.seed);
  ad::NoGradGuard no_grad;
  const Route base{std::vector<std::size_t>(model.gen.bucket_count(), 0)};
  const auto reference = model.gen.forward(base);
  io::CsvWriter csv({"bucket", "sigma", "mean_distance"});
  for (double sigma : sigmas) {
    double total = 0.0;
    for (std::size_t d = 0; d < a.draws; ++d) {
      const auto img = analysis::noise_inject(model.gen, a.bucket - 1, sigma, rng).forward(base);
      double sq = 0.0;
      for (std::size_t i = 0; i < img.numel(); ++i) sq += std::pow(img[i] - reference[i], 2);
      total += std::sqrt(sq);
    }
    csv.add_row({std::to_string(a.bucket), io::format_number(sigma), io::format_number(total / a.draws)});
    out << "sigma " << io::format_number(sigma) << ": mean distance " << io::format_number(total / a.draws) << "\n";
  }
  csv.save(dir / "noise.csv");
  return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string config;
  std::string values;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> steps;
};

// "2,4,8" or ranges "5..50:5"; duplicates are dropped with a warning.
std::vector<std::size_t> parse_sweep_values(const std::string& text, std::ostream& err) {
  std::vector<std::size_t> raw;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto dots = item.find("..");
    try {
      if (dots == std::string::npos) {
        raw.push_back(parse_size_list("--values", item).at(0));
        continue;
      }
      const auto colon = item.find(':', dots);
      const std::size_t lo = std::stoul(item.substr(0, dots));
      const std::size_t hi = std::stoul(item.substr(dots + 2, colon == std::string::npos ? std::string::npos : colon - dots - 2));
      const std::size_t step = colon == std::string::npos ? 1 : std::stoul(item.substr(colon + 1));
      if (step == 0 || lo > hi) throw std::invalid_argument(item);
      for (std::size_t v = lo; v <= hi; v += step) raw.push_back(v);
    } catch (const std::logic_error&) {
      throw ConfigError("--values: cannot parse '" + item + "' (use 2,4,8 or 5..50:5)");
    }
  }
  std::vector<std::size_t> out;
  std::set<std::size_t> seen;
  for (auto v : raw) {
    if (v == 0) throw ConfigError("--values: n_in must be >= 1");
    if (!seen.insert(v).second) {
      err << "warning: duplicate n_in value " << v << " ignored\n";
      continue;
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("--values: no values given");
  return out;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = resolve_config(a.config, a.seed, a.out, a.steps);
  const auto values = parse_sweep_values(a.values, err);
  const fs::path dir = prepare_out(cfg.str("run.out"));
  io::write_text_atomic(dir / "config.resolved", cfg.resolved() + "# sweep values = " + join_sizes(values) + "\n");
  const std::size_t buckets = cfg.sizes("model.instances").size();
  io::CsvWriter csv({"n_in", "latent_cardinality", "modes_covered", "high_quality", "loss_d", "loss_g"});
  for (auto v : values) {
    RunConfig run_cfg = cfg;
    run_cfg.set("model.instances", join_sizes(std::vector<std::size_t>(buckets, v)));
    const auto run = train_model(run_cfg);
    const bool trained = !run.report.rows.empty();
    csv.add_row({std::to_string(v), latent_cardinality(run.gen).str(),
                 run.coverage ? std::to_string(run.coverage->covered) : "",
                 run.coverage ? io::format_number(run.coverage->high_quality) : "",
                 trained ? io::format_number(run.report.rows.back().loss_d) : "",
                 trained ? io::format_number(run.report.rows.back().loss_g) : ""});
    out << "n_in " << v << " done\n";
  }
  csv.save(dir / "sweep.csv");
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  kernels::configure_threads_from_env();
  CLI::App app{"rpgan: random-path GAN toolkit. Exit codes: 0 ok, 2 configuration error, "
               "3 numerical failure, 4 verification failure. RPGAN_THREADS caps worker threads."};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--config", train_args.config, "config file (section.key = value)")->required();
  train_cmd->add_option("--seed", train_args.seed, "override run.seed");
  train_cmd->add_option("--out", train_args.out, "override run.out");
  train_cmd->add_option("--steps", train_args.steps, "override train.steps");
  train_cmd->footer(schema_help());

  AnalyzeArgs analyze_args;
  auto* analyze_cmd = app.add_subcommand("analyze", "per-bucket diversity ratios and bucket grids");
  analyze_cmd->add_option("--checkpoint", analyze_args.checkpoint, "model file")->required();
  analyze_cmd->add_option("--metric", analyze_args.metric, "color | semantic | pixel")->capture_default_str();
  analyze_cmd->add_option("--routes", analyze_args.routes, "base routes")->capture_default_str();
  analyze_cmd->add_option("--per-bucket", analyze_args.per_bucket, "images per varied bucket")->capture_default_str();
  analyze_cmd->add_option("--seed", analyze_args.seed)->capture_default_str();
  analyze_cmd->add_option("--out", analyze_args.out)->capture_default_str();

  FuseArgs fuse_args;
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse a range of linear fully-connected buckets");
  fuse_cmd->add_option("--checkpoint", fuse_args.checkpoint, "model file")->required();
  fuse_cmd->add_option("--range", fuse_args.range, "1-based bucket range a..b")->required();
  fuse_cmd->add_option("--count", fuse_args.count, "instances of the fused bucket")->required();
  fuse_cmd->add_option("--batch", fuse_args.batch, "benchmark batch")->capture_default_str();
  fuse_cmd->add_option("--reps", fuse_args.reps, "timed repetitions (median reported)")->capture_default_str();
  fuse_cmd->add_option("--tolerance", fuse_args.tolerance, "max abs difference accepted (default 1e-4)");
  fuse_cmd->add_option("--seed", fuse_args.seed)->capture_default_str();
  fuse_cmd->add_option("--out", fuse_args.out)->capture_default_str();

  ExtendArgs extend_args;
  auto* extend_cmd = app.add_subcommand("extend", "append instances and optionally train only them");
  extend_cmd->add_option("--checkpoint", extend_args.checkpoint, "model file")->required();
  extend_cmd->add_option("--add", extend_args.add, "instances added per bucket, e.g. 5,5,0,0")->required();
  extend_cmd->add_option("--init", extend_args.init, "random | clone-perturb")->capture_default_str();
  extend_cmd->add_option("--perturb", extend_args.perturb, "clone-perturb relative noise")->capture_default_str();
  extend_cmd->add_flag("--unfreeze-z", extend_args.unfreeze_z, "train Z together with the new instances");
  extend_cmd->add_option("--config", extend_args.config, "config overriding data/train keys of the model");
  extend_cmd->add_option("--steps", extend_args.steps, "incremental training steps")->capture_default_str();
  extend_cmd->add_option("--seed", extend_args.seed)->capture_default_str();
  extend_cmd->add_option("--out", extend_args.out)->capture_default_str();

  InvertArgs invert_args;
  auto* invert_cmd = app.add_subcommand("invert", "train per-bucket route classifiers");
  invert_cmd->add_option("--checkpoint", invert_args.checkpoint, "model file")->required();
  invert_cmd->add_option("--samples", invert_args.samples, "generated images (80/20 split)")->capture_default_str();
  invert_cmd->add_option("--epochs", invert_args.classifier.epochs)->capture_default_str();
  invert_cmd->add_option("--hidden", invert_args.classifier.hidden)->capture_default_str();
  invert_cmd->add_option("--channels", invert_args.classifier.channels)->capture_default_str();
  invert_cmd->add_option("--seed", invert_args.seed)->capture_default_str();
  invert_cmd->add_option("--out", invert_args.out)->capture_default_str();

  GenerateArgs generate_args;
  auto* generate_cmd = app.add_subcommand("generate", "render samples, a given route, or a route edit");
  generate_cmd->add_option("--checkpoint", generate_args.checkpoint, "model file")->required();
  generate_cmd->add_option("--count", generate_args.count, "random routes to render")->capture_default_str();
  generate_cmd->add_option("--cols", generate_args.cols, "grid columns")->capture_default_str();
  generate_cmd->add_option("--route", generate_args.route, "route such as 0-3-1 (0-based instance indices)");
  generate_cmd->add_option("--edit", generate_args.edit, "bucket:index edit of --route (1-based bucket)");
  generate_cmd->add_option("--seed", generate_args.seed)->capture_default_str();
  generate_cmd->add_option("--out", generate_args.out)->capture_default_str();

  NoiseArgs noise_args;
  auto* noise_cmd = app.add_subcommand("noise", "perturb one bucket of a single-instance generator");
  noise_cmd->add_option("--checkpoint", noise_args.checkpoint, "model file")->required();
  noise_cmd->add_option("--bucket", noise_args.bucket, "1-based bucket")->capture_default_str();
  noise_cmd->add_option("--sigmas", noise_args.sigmas, "comma-separated noise levels")->capture_default_str();
  noise_cmd->add_option("--draws", noise_args.draws)->capture_default_str();
  noise_cmd->add_option("--seed", noise_args.seed)->capture_default_str();
  noise_cmd->add_option("--out", noise_args.out)->capture_default_str();

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "train one model per instance count n_in");
  sweep_cmd->add_option("--config", sweep_args.config, "config file")->required();
  sweep_cmd->add_option("--values", sweep_args.values, "n_in values: 2,4,8 or 5..50:5")->required();
  sweep_cmd->add_option("--seed", sweep_args.seed, "override run.seed");
  sweep_cmd->add_option("--out", sweep_args.out, "override run.out");
  sweep_cmd->add_option("--steps", sweep_args.steps, "override train.steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, out);
    if (*analyze_cmd) return cmd_analyze(analyze_args, out);
    if (*fuse_cmd) return cmd_fuse(fuse_args, out);
    if (*extend_cmd) return cmd_extend(extend_args, out);
    if (*invert_cmd) return cmd_invert(invert_args, out);
    if (*generate_cmd) return cmd_generate(generate_args, out);
    if (*noise_cmd) return cmd_noise(noise_args, out);
    if (*sweep_cmd) return cmd_sweep(sweep_args, out, err);
  } catch (const train::NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericalError;
  } catch (const VerificationFailure& e) {
    err << "error: " << e.what() << "\n";
    return kVerificationFailure;
  } catch (const analysis::MetricUnavailable& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const io::IoError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const io::FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::invalid_argument& e) {  // ConfigError, ShapeError, FusionError
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::out_of_range& e) {  // RouteError
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ad::ContractError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}

}  // namespace rpgan::cli
