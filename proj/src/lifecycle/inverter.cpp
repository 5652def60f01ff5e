// SPDX-License-Identifier: Apache-2.0
#include "rpgan/lifecycle/inverter.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rpgan/autodiff/ops.hpp"
#include "rpgan/autodiff/tape.hpp"
#include "rpgan/io/errors.hpp"
#include "rpgan/train/optim.hpp"

namespace rpgan::lifecycle {

void ClassifierConfig::validate() const {
  if (channels == 0 || hidden == 0) throw std::invalid_argument("classifier widths must be >= 1");
  if (epochs == 0 || batch == 0) throw std::invalid_argument("classifier epochs and batch must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("classifier lr must be > 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
}

namespace {

bool conv_friendly(const Shape& s) {
  return s.size() == 3 && s[1] >= 4 && s[2] >= 4 && s[1] % 4 == 0 && s[2] % 4 == 0;
}

template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  std::vector<T> v(ad::numel(shape));
  for (auto& x : v) x = static_cast<T>(normal(rng));
  return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
Tensor<T> zeros_param(Shape shape) {
  auto t = Tensor<T>::zeros(std::move(shape));
  t.set_requires_grad(true);
  return t;
}

}  // namespace

template <typename T>
IndexClassifier<T> IndexClassifier<T>::create(const Shape& input_shape, std::size_t classes,
                                              const ClassifierConfig& cfg, Rng& rng) {
  if (classes == 0) throw std::invalid_argument("a classifier needs at least one class");
  IndexClassifier c;
  c.input_shape_ = input_shape;
  c.classes_ = classes;
  c.conv_ = conv_friendly(input_shape);
  if (classes == 1) return c;
  auto& p = c.params_;
  if (c.conv_) {
    const std::size_t ch = input_shape[0], c1 = cfg.channels, c2 = 2 * cfg.channels;
    const std::size_t flat = c2 * (input_shape[1] / 4) * (input_shape[2] / 4);
    p.push_back({"conv1.weight", he_normal<T>({c1, ch, 3, 3}, ch * 9, rng)});
    p.push_back({"conv1.bias", zeros_param<T>({c1})});
    p.push_back({"conv2.weight", he_normal<T>({c2, c1, 3, 3}, c1 * 9, rng)});
    p.push_back({"conv2.bias", zeros_param<T>({c2})});
    p.push_back({"head.weight", he_normal<T>({flat, classes}, flat, rng)});
  } else {
    const std::size_t in = ad::numel(input_shape), h = cfg.hidden;
    p.push_back({"fc1.weight", he_normal<T>({in, h}, in, rng)});
    p.push_back({"fc1.bias", zeros_param<T>({h})});
    p.push_back({"fc2.weight", he_normal<T>({h, h}, h, rng)});
    p.push_back({"fc2.bias", zeros_param<T>({h})});
    p.push_back({"head.weight", he_normal<T>({h, classes}, h, rng)});
  }
  p.push_back({"head.bias", zeros_param<T>({classes})});
  return c;
}

template <typename T>
const Tensor<T>& IndexClassifier<T>::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw std::out_of_range("classifier has no parameter '" + name + "'");
}

template <typename T>
Tensor<T> IndexClassifier<T>::logits(const Tensor<T>& x) const {
  const std::size_t n = x.dim(0);
  if (ad::numel(x.shape()) != n * ad::numel(input_shape_)) {
    throw ad::ShapeError("classifier expects samples of shape " + ad::to_string(input_shape_) +
                         ", got batch " + ad::to_string(x.shape()));
  }
  if (classes_ == 1) return Tensor<T>::zeros({n, 1});
  Tensor<T> h;
  if (conv_) {
    Shape s{n};
    s.insert(s.end(), input_shape_.begin(), input_shape_.end());
    h = ad::reshape(x, s);
    h = ad::avg_pool2x(ad::relu(ad::add_channel_bias(ad::conv2d(h, param("conv1.weight"), 1, 1), param("conv1.bias"))));
    h = ad::avg_pool2x(ad::relu(ad::add_channel_bias(ad::conv2d(h, param("conv2.weight"), 1, 1), param("conv2.bias"))));
    h = ad::reshape(h, Shape{n, ad::numel(h.shape()) / n});
  } else {
    h = ad::reshape(x, Shape{n, ad::numel(input_shape_)});
    h = ad::relu(ad::add_row_bias(ad::matmul(h, param("fc1.weight")), param("fc1.bias")));
    h = ad::relu(ad::add_row_bias(ad::matmul(h, param("fc2.weight")), param("fc2.bias")));
  }
  return ad::add_row_bias(ad::matmul(h, param("head.weight")), param("head.bias"));
}

template <typename T>
std::vector<std::vector<double>> IndexClassifier<T>::probabilities(const Tensor<T>& x) const {
  ad::NoGradGuard no_grad;
  const auto z = logits(x);
  const std::size_t n = z.dim(0), c = z.dim(1);
  std::vector<std::vector<double>> out(n, std::vector<double>(c));
  for (std::size_t i = 0; i < n; ++i) {
    double top = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) top = std::max(top, static_cast<double>(z[i * c + j]));
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += out[i][j] = std::exp(static_cast<double>(z[i * c + j]) - top);
    for (auto& v : out[i]) v /= total;
  }
  return out;
}

template <typename T>
std::vector<std::size_t> IndexClassifier<T>::predict(const Tensor<T>& x) const {
  ad::NoGradGuard no_grad;
  const auto z = logits(x);
  const std::size_t n = z.dim(0), c = z.dim(1);
  std::vector<std::size_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 1; j < c; ++j)
      if (z[i * c + j] > z[i * c + out[i]]) out[i] = j;
  return out;
}

template <typename T>
std::vector<Route> Inverter<T>::invert_batch(const Tensor<T>& images) const {
  const std::size_t n = images.dim(0);
  std::vector<Route> routes(n);
  for (const auto& c : classifiers) {
    const auto idx = c.predict(images);
    for (std::size_t i = 0; i < n; ++i) routes[i].indices.push_back(idx[i]);
  }
  return routes;
}

template <typename T>
Route Inverter<T>::invert(const Tensor<T>& image) const {
  if (classifiers.empty()) throw ad::ContractError("inverter has no classifiers");
  const Shape& want = classifiers.front().input_shape();
  if (image.shape() != want) {
    throw ad::ShapeError("inverter expects an image of shape " + ad::to_string(want) + ", got " +
                         ad::to_string(image.shape()));
  }
  Shape batch{1};
  batch.insert(batch.end(), want.begin(), want.end());
  return invert_batch(ad::reshape(image, batch)).front();
}

template <typename T>
io::CsvWriter Inverter<T>::accuracy_csv() const {
  io::CsvWriter csv({"bucket", "instances", "accuracy", "chance"});
  for (std::size_t b = 0; b < classifiers.size(); ++b) {
    const std::size_t m = classifiers[b].classes();
    csv.add_row({std::to_string(b + 1), std::to_string(m), io::format_number(accuracy[b]),
                 io::format_number(1.0 / static_cast<double>(m))});
  }
  return csv;
}

namespace {

template <typename T>
Tensor<T> gather(const Tensor<T>& x, const std::vector<std::size_t>& rows) {
  const std::size_t width = x.numel() / x.dim(0);
  std::vector<T> v;
  v.reserve(rows.size() * width);
  const auto data = x.data();
  for (auto r : rows) v.insert(v.end(), data.begin() + r * width, data.begin() + (r + 1) * width);
  return Tensor<T>({rows.size(), width}, std::move(v));
}

template <typename T>
void fit(IndexClassifier<T>& clf, const Tensor<T>& images, const std::vector<std::size_t>& labels,
         const std::vector<std::size_t>& train_rows, const ClassifierConfig& cfg, Rng& rng) {
  if (clf.classes() == 1) return;
  std::vector<ParameterRef<T>> refs;
  for (auto& p : clf.params()) refs.push_back({p.name, p.tensor, true});
  train::Adam<T> opt(refs, {cfg.lr, 0.9, 0.999, 1e-8});
  std::vector<std::size_t> order = train_rows;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::vector<std::size_t> rows(order.begin() + start, order.begin() + end);
      std::vector<std::size_t> y;
      for (auto r : rows) y.push_back(labels[r]);
      opt.zero_grad();
      auto loss = ad::softmax_cross_entropy(clf.logits(gather(images, rows)), y);
      ad::backward(loss);
      opt.step();
    }
  }
}

}  // namespace

template <typename T>
Inverter<T> train_inverter(const Generator<T>& gen, std::size_t samples, const ClassifierConfig& cfg,
                           Rng& rng) {
  cfg.validate();
  const std::size_t n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(samples)));
  if (n_train == 0 || n_train == samples) {
    throw ad::ContractError("inverter needs samples on both sides of the train/held-out split, got " +
                            std::to_string(samples));
  }
  Tensor<T> images;
  std::vector<Route> routes;
  {
    ad::NoGradGuard no_grad;
    auto [batch, rs] = gen.batch_forward(samples, rng);
    images = batch;
    routes = std::move(rs);
  }
  std::vector<std::size_t> train_rows(n_train), held_rows(samples - n_train);
  std::iota(train_rows.begin(), train_rows.end(), 0);
  std::iota(held_rows.begin(), held_rows.end(), n_train);

  const std::size_t buckets = gen.bucket_count();
  Inverter<T> inv;
  inv.config = cfg;
  inv.held_out = held_rows.size();
  inv.accuracy.assign(buckets, 0.0);
  std::vector<std::uint64_t> seeds;
  for (std::size_t b = 0; b < buckets; ++b) seeds.push_back(rng());
  for (std::size_t b = 0; b < buckets; ++b) {
    Rng init(seeds[b]);
    inv.classifiers.push_back(IndexClassifier<T>::create(gen.output_shape(), gen.bucket(b).size(), cfg, init));
  }

  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t sb = 0; sb < static_cast<std::ptrdiff_t>(buckets); ++sb) {
    const auto b = static_cast<std::size_t>(sb);
    try {
      Rng local(seeds[b] ^ 0x9e3779b97f4a7c15ULL);
      std::vector<std::size_t> labels(samples);
      for (std::size_t i = 0; i < samples; ++i) labels[i] = routes[i][b];
      fit(inv.classifiers[b], images, labels, train_rows, cfg, local);
      const auto pred = inv.classifiers[b].predict(gather(images, held_rows));
      std::size_t hits = 0;
      for (std::size_t i = 0; i < held_rows.size(); ++i) hits += pred[i] == labels[held_rows[i]];
      inv.accuracy[b] = static_cast<double>(hits) / static_cast<double>(held_rows.size());
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return inv;
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& s, char sep) {
  std::vector<std::size_t> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(std::stoull(item));
  return out;
}

}  // namespace

void put_inverter(io::Checkpoint& ckpt, const Inverter<float>& inv, const std::string& prefix) {
  if (inv.classifiers.empty()) throw ad::ContractError("cannot store an empty inverter");
  std::vector<std::size_t> classes;
  for (const auto& c : inv.classifiers) classes.push_back(c.classes());
  ckpt.meta[prefix + "input_shape"] = join_sizes(inv.classifiers.front().input_shape(), 'x');
  ckpt.meta[prefix + "classes"] = join_sizes(classes, ',');
  ckpt.meta[prefix + "channels"] = std::to_string(inv.config.channels);
  ckpt.meta[prefix + "hidden"] = std::to_string(inv.config.hidden);
  ckpt.meta[prefix + "held_out"] = std::to_string(inv.held_out);
  std::string acc;
  for (std::size_t b = 0; b < inv.accuracy.size(); ++b) acc += (b ? "," : "") + io::format_number(inv.accuracy[b]);
  ckpt.meta[prefix + "accuracy"] = acc;
  std::erase_if(ckpt.tensors, [&](const io::NamedTensor& t) { return t.name.starts_with(prefix); });
  for (std::size_t b = 0; b < inv.classifiers.size(); ++b)
    for (const auto& p : inv.classifiers[b].params())
      ckpt.tensors.push_back(io::to_named(prefix + "b" + std::to_string(b) + "." + p.name, p.tensor));
}

Inverter<float> get_inverter(const io::Checkpoint& ckpt, const std::string& prefix) {
  Inverter<float> inv;
  std::vector<std::size_t> classes, shape;
  try {
    shape = parse_sizes(ckpt.meta_value(prefix + "input_shape"), 'x');
    classes = parse_sizes(ckpt.meta_value(prefix + "classes"), ',');
    inv.config.channels = std::stoull(ckpt.meta_value(prefix + "channels"));
    inv.config.hidden = std::stoull(ckpt.meta_value(prefix + "hidden"));
    inv.held_out = std::stoull(ckpt.meta_value(prefix + "held_out"));
    std::stringstream acc(ckpt.meta_value(prefix + "accuracy"));
    std::string item;
    while (std::getline(acc, item, ',')) inv.accuracy.push_back(std::stod(item));
  } catch (const std::logic_error& e) {
    throw io::FormatError("malformed inverter metadata in checkpoint: " + std::string(e.what()));
  }
  if (classes.empty() || inv.accuracy.size() != classes.size()) {
    throw io::FormatError("inverter metadata lists " + std::to_string(classes.size()) + " buckets and " +
                          std::to_string(inv.accuracy.size()) + " accuracies");
  }
  Rng unused(0);
  for (std::size_t b = 0; b < classes.size(); ++b) {
    auto clf = IndexClassifier<float>::create(shape, classes[b], inv.config, unused);
    for (auto& p : clf.params()) {
      const auto& stored = ckpt.tensor(prefix + "b" + std::to_string(b) + "." + p.name);
      if (stored.shape != p.tensor.shape()) {
        throw io::FormatError("tensor '" + stored.name + "' has shape " + ad::to_string(stored.shape) +
                              ", expected " + ad::to_string(p.tensor.shape()));
      }
      p.tensor = io::from_named(stored);
    }
    inv.classifiers.push_back(std::move(clf));
  }
  return inv;
}

template class IndexClassifier<float>;
template class IndexClassifier<double>;
template struct Inverter<float>;
template struct Inverter<double>;
template Inverter<float> train_inverter(const Generator<float>&, std::size_t, const ClassifierConfig&, Rng&);
template Inverter<double> train_inverter(const Generator<double>&, std::size_t, const ClassifierConfig&, Rng&);

}  // namespace rpgan::lifecycle
