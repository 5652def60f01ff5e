// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "rpgan/analysis/metrics.hpp"
#include "rpgan/core/generator.hpp"
#include "rpgan/io/csv.hpp"

namespace rpgan::analysis {

/// Route held fixed except at `bucket`. A non-empty `subset` lists the
/// instances to render, in order.
struct FrozenRouteSpec {
  Route base;
  std::size_t bucket = 0;
  std::vector<std::size_t> subset;
};

/// Images for routes that differ from spec.base only at spec.bucket. Without
/// a subset, k distinct instances are drawn without replacement (k > m is a
/// ContractError). The rendered routes are written to `routes` when given.
template <typename T>
std::vector<Tensor<T>> freeze_and_vary(const Generator<T>& gen, const FrozenRouteSpec& spec,
                                       std::size_t k, Rng& rng,
                                       std::vector<Route>* routes = nullptr);

struct BucketRatio {
  std::size_t bucket;  // 0-based
  double mean;
  double std;          // population std over used routes
};

struct DiversityReport {
  std::string metric;
  std::vector<BucketRatio> ratios;
  std::size_t routes_requested = 0;
  std::size_t routes_used = 0;
  std::size_t routes_skipped = 0;
  std::size_t images_per_bucket = 0;

  /// bucket,metric,mean_ratio,std_ratio,routes (bucket numbers 1-based)
  io::CsvWriter to_csv() const;
};

/// For every base route and bucket l, renders K images varying only bucket
/// l (instances drawn without replacement) and forms
///   D_l = sum_{i != j} d(Im_i^l, Im_j^l) / sum_{i != j} d(Im_i^1, Im_j^1).
/// Routes with a zero denominator are skipped; skipping more than half is an
/// error. Routes are evaluated in parallel; the result does not depend on
/// the thread count.
template <typename T>
DiversityReport diversity_ratio(const Generator<T>& gen, const PairwiseMetric<T>& metric,
                                const std::string& metric_name,
                                const std::vector<Route>& base_routes,
                                std::size_t images_per_bucket, Rng& rng);

/// Draws `routes` base routes uniformly, then as above.
template <typename T>
DiversityReport diversity_ratio(const Generator<T>& gen, const PairwiseMetric<T>& metric,
                                const std::string& metric_name, std::size_t routes,
                                std::size_t images_per_bucket, Rng& rng);

/// Copy of a single-instance-per-bucket generator with N(0, sigma^2) added
/// to every parameter of bucket `layer`. Other buckets and Z stay shared.
template <typename T>
Generator<T> noise_inject(const Generator<T>& gen, std::size_t layer, double sigma, Rng& rng);

}  // namespace rpgan::analysis
