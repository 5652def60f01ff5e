// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rpgan/core/instance.hpp"
#include "rpgan/core/route.hpp"

namespace rpgan {

using BigInt = boost::multiprecision::cpp_int;

/// Declarative description of a generator: the input shape, one LayerSpec
/// and instance count per bucket, and the activation applied to the output.
struct GeneratorArch {
  Shape z_shape;
  std::vector<LayerSpec> layers;
  std::vector<std::size_t> instances;
  Activation output_activation = Activation::Tanh;

  /// Checks that the layer chain is shape-compatible and returns the
  /// per-sample output shape.
  Shape validate() const;
};

template <typename T>
struct Bucket {
  LayerSpec spec;
  std::vector<Instance<T>> instances;

  std::size_t size() const { return instances.size(); }
};

template <typename T>
struct ParameterRef {
  std::string name;
  Tensor<T> tensor;
  bool trainable;
};

/// A generator whose only source of randomness is the route: the fixed,
/// learnable input Z is passed through one instance from every bucket.
///
/// Copies share Z and every instance's parameter storage (trainability flags
/// are per copy). Generation is safe from several threads on a generator
/// that is not being trained.
template <typename T>
class Generator {
 public:
  Generator(Tensor<T> z, std::vector<Bucket<T>> buckets,
            Activation output_activation = Activation::Tanh);

  /// Z ~ N(0, I); every instance initialized with independent draws.
  static Generator create(const GeneratorArch& arch, Rng& rng);

  const Tensor<T>& z() const { return z_; }
  void set_z(Tensor<T> z);
  bool z_trainable() const { return z_trainable_; }
  void set_z_trainable(bool flag) { z_trainable_ = flag; }

  std::size_t bucket_count() const { return buckets_.size(); }
  const Bucket<T>& bucket(std::size_t i) const { return buckets_.at(i); }
  Bucket<T>& bucket(std::size_t i) { return buckets_.at(i); }
  const std::vector<Bucket<T>>& buckets() const { return buckets_; }
  std::vector<std::size_t> instance_counts() const;
  Activation output_activation() const { return output_activation_; }

  /// Per-sample shape of generated outputs.
  const Shape& output_shape() const { return output_shape_; }
  /// Per-sample shape entering bucket i (Z's shape for i = 0).
  Shape input_shape(std::size_t bucket) const;
  /// True if any bucket applies a nonlinearity (the output activation aside).
  bool nonlinear() const;

  Route sample_route(Rng& rng) const;
  void validate(const Route& route) const;

  /// One image for one route, without a batch axis.
  Tensor<T> forward(const Route& route) const;
  /// [N, output...]: sample r follows routes[r]; instances are applied to
  /// the rows that selected them.
  Tensor<T> forward_batch(std::span<const Route> routes) const;
  /// Draws `batch_size` independent routes and returns their images.
  std::pair<Tensor<T>, std::vector<Route>> batch_forward(std::size_t batch_size, Rng& rng) const;

  /// Z followed by every instance parameter, in a stable order.
  std::vector<ParameterRef<T>> parameters() const;
  GeneratorArch arch() const;
  Generator clone() const;

 private:
  Tensor<T> z_;
  bool z_trainable_ = true;
  std::vector<Bucket<T>> buckets_;
  Activation output_activation_;
  Shape output_shape_;
};

/// Exact product of the instance counts.
BigInt latent_cardinality(std::span<const std::size_t> instance_counts);

template <typename T>
BigInt latent_cardinality(const Generator<T>& gen) {
  return latent_cardinality(gen.instance_counts());
}

/// latent_cardinality / dataset_size.
double coverage(std::span<const std::size_t> instance_counts, std::size_t dataset_size);

template <typename T>
double coverage(const Generator<T>& gen, std::size_t dataset_size) {
  return coverage(gen.instance_counts(), dataset_size);
}

/// Negative sum, over every bucket parameter and every unordered pair of
/// instances, of the MSE between the two copies after dividing both by the
/// pooled population standard deviation of that parameter across the
/// bucket. The normalizer is a constant for differentiation; parameters
/// whose normalizer is below 1e-12 contribute zero.
template <typename T>
Tensor<T> diversity_loss(const Generator<T>& gen);

}  // namespace rpgan
