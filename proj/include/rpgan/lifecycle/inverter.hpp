// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rpgan/core/generator.hpp"
#include "rpgan/io/checkpoint.hpp"
#include "rpgan/io/csv.hpp"

namespace rpgan::lifecycle {

struct ClassifierConfig {
  std::size_t channels = 8;  // conv path: channels, then 2x channels
  std::size_t hidden = 128;  // vector path: two hidden layers of this width
  std::size_t epochs = 60;
  std::size_t batch = 64;
  double lr = 3e-3;
  double train_fraction = 0.8;

  void validate() const;
};

/// Predicts one bucket's instance index from an image. Images of rank 3
/// with sides divisible by 4 use two 3x3 conv + ReLU + 2x2 average-pool
/// stages and a linear head; anything else is flattened into a two-layer
/// ReLU MLP with a linear head. A single-class bucket has no parameters.
template <typename T>
class IndexClassifier {
 public:
  static IndexClassifier create(const Shape& input_shape, std::size_t classes,
                                const ClassifierConfig& cfg, Rng& rng);

  std::size_t classes() const { return classes_; }
  bool convolutional() const { return conv_; }
  const Shape& input_shape() const { return input_shape_; }

  /// [N, classes] for a batch [N, input...].
  Tensor<T> logits(const Tensor<T>& x) const;
  /// Row-wise softmax of logits(x).
  std::vector<std::vector<double>> probabilities(const Tensor<T>& x) const;
  /// Argmax per row, lowest index on ties.
  std::vector<std::size_t> predict(const Tensor<T>& x) const;

  std::vector<Parameter<T>>& params() { return params_; }
  const std::vector<Parameter<T>>& params() const { return params_; }

 private:
  const Tensor<T>& param(const std::string& name) const;

  Shape input_shape_;
  std::size_t classes_ = 1;
  bool conv_ = false;
  std::vector<Parameter<T>> params_;
};

/// One classifier per bucket: an encoder from images to routes.
template <typename T>
struct Inverter {
  std::vector<IndexClassifier<T>> classifiers;
  std::vector<double> accuracy;  // held-out, per bucket
  std::size_t held_out = 0;
  ClassifierConfig config;

  std::size_t bucket_count() const { return classifiers.size(); }
  Route invert(const Tensor<T>& image) const;
  /// Routes for a batch [N, output...].
  std::vector<Route> invert_batch(const Tensor<T>& images) const;
  /// bucket, instances, accuracy, chance (bucket 1-based)
  io::CsvWriter accuracy_csv() const;
};

/// Generates `samples` images with recorded routes, splits them
/// train/held-out, and fits every bucket's classifier with Adam on
/// softmax cross-entropy. Buckets train in parallel from pre-drawn seeds.
template <typename T>
Inverter<T> train_inverter(const Generator<T>& gen, std::size_t samples,
                           const ClassifierConfig& cfg, Rng& rng);

void put_inverter(io::Checkpoint& ckpt, const Inverter<float>& inv,
                  const std::string& prefix = "inv.");
Inverter<float> get_inverter(const io::Checkpoint& ckpt, const std::string& prefix = "inv.");

}  // namespace rpgan::lifecycle
