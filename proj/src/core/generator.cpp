// SPDX-License-Identifier: Apache-2.0
#include "rpgan/core/generator.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "rpgan/autodiff/ops.hpp"

namespace rpgan {

Shape GeneratorArch::validate() const {
  if (layers.empty()) throw std::invalid_argument("generator needs at least one bucket");
  if (layers.size() != instances.size()) {
    throw std::invalid_argument("generator has " + std::to_string(layers.size()) +
                                " layers but " + std::to_string(instances.size()) +
                                " instance counts");
  }
  Shape shape = z_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (instances[i] == 0) {
      throw std::invalid_argument("bucket " + std::to_string(i) + " has no instances");
    }
    try {
      shape = layers[i].output_shape(shape);
    } catch (const ad::ShapeError& e) {
      throw ad::ShapeError("bucket " + std::to_string(i) + ": " + e.what());
    }
  }
  return shape;
}

template <typename T>
Generator<T>::Generator(Tensor<T> z, std::vector<Bucket<T>> buckets, Activation output_activation)
    : z_(std::move(z)), buckets_(std::move(buckets)), output_activation_(output_activation) {
  GeneratorArch a = arch();
  output_shape_ = a.validate();
  for (std::size_t b = 0; b < buckets_.size(); ++b)
    for (const auto& inst : buckets_[b].instances)
      if (!(inst.spec == buckets_[b].spec)) {
        throw std::invalid_argument("bucket " + std::to_string(b) +
                                    " holds an instance with a different layer spec");
      }
}

template <typename T>
Generator<T> Generator<T>::create(const GeneratorArch& arch, Rng& rng) {
  arch.validate();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> zv(ad::numel(arch.z_shape));
  for (auto& v : zv) v = static_cast<T>(normal(rng));
  std::vector<Bucket<T>> buckets;
  for (std::size_t b = 0; b < arch.layers.size(); ++b) {
    Bucket<T> bucket{arch.layers[b], {}};
    for (std::size_t i = 0; i < arch.instances[b]; ++i)
      bucket.instances.push_back(Instance<T>::create(arch.layers[b], rng));
    buckets.push_back(std::move(bucket));
  }
  return Generator(Tensor<T>(arch.z_shape, std::move(zv), true), std::move(buckets),
                   arch.output_activation);
}

template <typename T>
void Generator<T>::set_z(Tensor<T> z) {
  if (z.shape() != z_.shape()) {
    throw ad::ShapeError("Z must keep shape " + ad::to_string(z_.shape()) + ", got " +
                         ad::to_string(z.shape()));
  }
  z_ = std::move(z);
}

template <typename T>
std::vector<std::size_t> Generator<T>::instance_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(buckets_.size());
  for (const auto& b : buckets_) counts.push_back(b.size());
  return counts;
}

template <typename T>
Shape Generator<T>::input_shape(std::size_t bucket) const {
  Shape shape = z_.shape();
  for (std::size_t i = 0; i < bucket && i < buckets_.size(); ++i)
    shape = buckets_[i].spec.output_shape(shape);
  return shape;
}

template <typename T>
bool Generator<T>::nonlinear() const {
  for (const auto& b : buckets_)
    if (!b.spec.linear()) return true;
  return false;
}

template <typename T>
Route Generator<T>::sample_route(Rng& rng) const {
  if (buckets_.empty()) throw std::logic_error("sample_route on an empty generator");
  Route route;
  route.indices.reserve(buckets_.size());
  for (const auto& b : buckets_) route.indices.push_back(uniform_index(rng, b.size()));
  return route;
}

template <typename T>
void Generator<T>::validate(const Route& route) const {
  validate_route(route, instance_counts());
}

template <typename T>
Tensor<T> Generator<T>::forward(const Route& route) const {
  auto batch = forward_batch(std::span<const Route>(&route, 1));
  return ad::reshape(batch, output_shape_);
}

template <typename T>
Tensor<T> Generator<T>::forward_batch(std::span<const Route> routes) const {
  if (routes.empty()) throw std::invalid_argument("forward_batch needs at least one route");
  for (const auto& r : routes) validate(r);
  const std::size_t n = routes.size();

  Shape z_row{1};
  z_row.insert(z_row.end(), z_.shape().begin(), z_.shape().end());
  const Tensor<T> z_batch = ad::reshape(z_, z_row);

  Tensor<T> x;
  for (std::size_t b = 0; b < buckets_.size(); ++b) {
    // Rows grouped by instance, in ascending instance order.
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < n; ++r) groups[routes[r][b]].push_back(r);

    std::vector<Tensor<T>> parts;
    std::vector<std::vector<std::size_t>> rows;
    for (auto& [index, members] : groups) {
      const auto& inst = buckets_[b].instances[index];
      Tensor<T> part;
      if (b == 0) {
        // Every row enters the first bucket with the same Z.
        auto single = inst.forward(z_batch);
        auto row = ad::reshape(single, Shape(single.shape().begin() + 1, single.shape().end()));
        part = ad::broadcast_rows(row, members.size());
      } else if (groups.size() == 1) {
        part = inst.forward(x);
      } else {
        part = inst.forward(ad::select_rows<T>(x, members));
      }
      parts.push_back(std::move(part));
      rows.push_back(std::move(members));
    }
    x = parts.size() == 1 ? parts.front() : ad::assemble_rows(parts, rows, n);
  }
  return apply_activation(x, output_activation_);
}

template <typename T>
std::pair<Tensor<T>, std::vector<Route>> Generator<T>::batch_forward(std::size_t batch_size,
                                                                     Rng& rng) const {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<Route> routes;
  routes.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) routes.push_back(sample_route(rng));
  auto images = forward_batch(routes);
  return {std::move(images), std::move(routes)};
}

template <typename T>
std::vector<ParameterRef<T>> Generator<T>::parameters() const {
  std::vector<ParameterRef<T>> out;
  out.push_back({"z", z_, z_trainable_});
  for (std::size_t b = 0; b < buckets_.size(); ++b)
    for (std::size_t i = 0; i < buckets_[b].size(); ++i) {
      const auto& inst = buckets_[b].instances[i];
      for (const auto& p : inst.params) {
        out.push_back({"b" + std::to_string(b) + ".i" + std::to_string(i) + "." + p.name,
                       p.tensor, inst.trainable});
      }
    }
  return out;
}

template <typename T>
GeneratorArch Generator<T>::arch() const {
  GeneratorArch a;
  a.z_shape = z_.shape();
  for (const auto& b : buckets_) {
    a.layers.push_back(b.spec);
    a.instances.push_back(b.size());
  }
  a.output_activation = output_activation_;
  return a;
}

template <typename T>
Generator<T> Generator<T>::clone() const {
  std::vector<Bucket<T>> buckets;
  for (const auto& b : buckets_) {
    Bucket<T> copy{b.spec, {}};
    for (const auto& inst : b.instances) copy.instances.push_back(inst.clone());
    buckets.push_back(std::move(copy));
  }
  Generator g(z_.clone(), std::move(buckets), output_activation_);
  g.z_trainable_ = z_trainable_;
  return g;
}

BigInt latent_cardinality(std::span<const std::size_t> instance_counts) {
  BigInt product = 1;
  for (auto m : instance_counts) product *= m;
  return product;
}

double coverage(std::span<const std::size_t> instance_counts, std::size_t dataset_size) {
  if (dataset_size == 0) throw std::invalid_argument("coverage needs a non-empty dataset");
  return latent_cardinality(instance_counts).template convert_to<double>() /
         static_cast<double>(dataset_size);
}

template <typename T>
Tensor<T> diversity_loss(const Generator<T>& gen) {
  constexpr double kStdFloor = 1e-12;
  Tensor<T> total;
  for (const auto& bucket : gen.buckets()) {
    const std::size_t m = bucket.size();
    if (m < 2) continue;
    const auto shapes = bucket.spec.parameter_shapes();
    for (std::size_t p = 0; p < shapes.size(); ++p) {
      // Pooled population standard deviation over all instances' entries.
      double s1 = 0.0, s2 = 0.0;
      std::size_t count = 0;
      for (const auto& inst : bucket.instances) {
        for (T v : inst.params[p].tensor.data()) {
          s1 += static_cast<double>(v);
          count += 1;
        }
      }
      const double mu = s1 / static_cast<double>(count);
      for (const auto& inst : bucket.instances)
        for (T v : inst.params[p].tensor.data()) s2 += (static_cast<double>(v) - mu) * (static_cast<double>(v) - mu);
      const double sd = std::sqrt(s2 / static_cast<double>(count));
      if (sd < kStdFloor) continue;

      const T inv_var = static_cast<T>(1.0 / (sd * sd));
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
          auto diff = ad::sub(bucket.instances[i].params[p].tensor,
                              bucket.instances[j].params[p].tensor);
          auto term = ad::scale(ad::mean(ad::square(diff)), inv_var);
          total = total.defined() ? ad::add(total, term) : term;
        }
    }
  }
  if (!total.defined()) return Tensor<T>::scalar(T(0));
  return ad::neg(total);
}

template class Generator<float>;
template class Generator<double>;
template Tensor<float> diversity_loss(const Generator<float>&);
template Tensor<double> diversity_loss(const Generator<double>&);

}  // namespace rpgan
