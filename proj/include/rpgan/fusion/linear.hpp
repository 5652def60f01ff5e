// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "rpgan/core/generator.hpp"
#include "rpgan/io/csv.hpp"

namespace rpgan::fusion {

/// Raised when a bucket range cannot be fused; the message names the bucket.
class FusionError : public std::invalid_argument {
 public:
  FusionError(std::size_t bucket, const std::string& what);
  std::size_t bucket() const { return bucket_; }

 private:
  std::size_t bucket_;
};

/// Fully-connected generator with identity activations everywhere and a
/// final Tanh. widths[0] is the size of Z; bucket i maps widths[i] to
/// widths[i + 1]. `out_shape`, if given, reshapes the last bucket's output.
GeneratorArch linear_arch(const std::vector<std::size_t>& widths,
                          const std::vector<std::size_t>& m, Shape out_shape = {},
                          bool bias = true);

/// The fully-connected MNIST configuration: 128 -> 128 -> 256 -> 512 -> 1024
/// -> 784 with m = (32, 32, 32, 16, 16), reshaped to 1x28x28.
GeneratorArch mnist_linear_arch(bool bias = true);

template <typename T>
Generator<T> build_linear_generator(const std::vector<std::size_t>& widths,
                                    const std::vector<std::size_t>& m, Rng& rng,
                                    Shape out_shape = {}, bool bias = true) {
  return Generator<T>::create(linear_arch(widths, m, std::move(out_shape), bias), rng);
}

/// Buckets first..last (inclusive, 0-based) collapse into one bucket whose
/// instance t is the composition of the instances in selection[t].
struct FusionPlan {
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<std::vector<std::size_t>> selection;

  std::size_t target_count() const { return selection.size(); }
  std::size_t span() const { return last - first + 1; }

  /// `count` distinct tuples drawn uniformly without replacement.
  static FusionPlan random(std::span<const std::size_t> instance_counts, std::size_t first,
                           std::size_t last, std::size_t count, Rng& rng);
  /// Throws FusionError / ContractError unless the plan fits the counts.
  void validate(std::span<const std::size_t> instance_counts) const;
};

/// Route through the original generator that a route of the fused one replays.
Route expand_route(const FusionPlan& plan, const Route& fused_route);

/// Replaces the planned range by one fused bucket. Other buckets and Z are
/// shared with `gen`. Biases compose as affine maps; products are formed in
/// double precision before rounding to T.
template <typename T>
Generator<T> fuse_buckets(const Generator<T>& gen, const FusionPlan& plan);

/// Largest absolute difference between fused and original outputs over
/// `tuples` random fused routes, each checked at the current Z and at
/// `z_perturbations` perturbed copies of it.
template <typename T>
double max_fusion_error(const Generator<T>& gen, const Generator<T>& fused,
                        const FusionPlan& plan, std::size_t tuples,
                        std::size_t z_perturbations, Rng& rng);

/// Multiply-adds per sample spent in buckets [first, last].
template <typename T>
std::size_t range_macs(const Generator<T>& gen, std::size_t first, std::size_t last);

struct BenchReport {
  std::size_t batch = 0;
  std::size_t reps = 0;
  double ns_composed = 0.0;  // median wall-clock per image
  double ns_fused = 0.0;
  std::size_t macs_composed = 0;  // per route, over the fused range
  std::size_t macs_fused = 0;
  double max_abs_diff = 0.0;

  double speedup() const { return ns_composed / ns_fused; }
  double mac_ratio() const {
    return static_cast<double>(macs_composed) / static_cast<double>(macs_fused);
  }
  /// variant, batch, ns_per_image, flops, speedup
  io::CsvWriter to_csv() const;
};

/// Times batched generation for both generators on identical routes with
/// one worker. The pair is checked for equivalence first; `tolerance`
/// bounds the accepted difference (a VerificationError is thrown above it).
template <typename T>
BenchReport benchmark_fusion(const Generator<T>& gen, const Generator<T>& fused,
                             const FusionPlan& plan, std::size_t batch, std::size_t reps,
                             Rng& rng, double tolerance);

/// Fused and composed outputs disagree beyond the tolerance.
class VerificationError : public std::runtime_error {
 public:
  VerificationError(double max_diff, double tolerance);
  double max_diff() const { return max_diff_; }

 private:
  double max_diff_;
};

/// Default equivalence tolerance for a scalar type.
template <typename T>
constexpr double default_tolerance() {
  return sizeof(T) == sizeof(float) ? 1e-4 : 1e-10;
}

}  // namespace rpgan::fusion
