// SPDX-License-Identifier: Apache-2.0
#include "rpgan/analysis/responsibility.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "rpgan/autodiff/ops.hpp"

namespace rpgan::analysis {

namespace {

std::vector<std::size_t> sample_without_replacement(std::size_t m, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pool(m);
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) std::swap(pool[i], pool[i + uniform_index(rng, m - i)]);
  pool.resize(k);
  return pool;
}

template <typename T>
std::vector<Tensor<T>> render(const Generator<T>& gen, const Route& base, std::size_t bucket,
                              const std::vector<std::size_t>& indices, std::vector<Route>* routes) {
  std::vector<Route> rs;
  for (auto i : indices) {
    Route r = base;
    r.indices[bucket] = i;
    rs.push_back(std::move(r));
  }
  auto batch = gen.forward_batch(rs);
  std::vector<Tensor<T>> images;
  const std::size_t width = batch.numel() / rs.size();
  for (std::size_t k = 0; k < rs.size(); ++k)
    images.emplace_back(gen.output_shape(),
                        std::vector<T>(batch.data().begin() + k * width, batch.data().begin() + (k + 1) * width));
  if (routes) *routes = std::move(rs);
  return images;
}

double ordered_pair_sum(const std::vector<std::vector<double>>& d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j)
      if (i != j) s += d[i][j];
  return s;
}

}  // namespace

template <typename T>
std::vector<Tensor<T>> freeze_and_vary(const Generator<T>& gen, const FrozenRouteSpec& spec,
                                       std::size_t k, Rng& rng, std::vector<Route>* routes) {
  gen.validate(spec.base);
  if (spec.bucket >= gen.bucket_count()) {
    throw RouteError("bucket " + std::to_string(spec.bucket) + " out of range (generator has " +
                     std::to_string(gen.bucket_count()) + ")");
  }
  const std::size_t m = gen.bucket(spec.bucket).size();
  std::vector<std::size_t> indices = spec.subset;
  if (indices.empty()) {
    if (k > m) {
      throw ad::ContractError("cannot draw " + std::to_string(k) + " distinct instances from bucket " +
                              std::to_string(spec.bucket) + " with " + std::to_string(m));
    }
    indices = sample_without_replacement(m, k, rng);
  }
  for (auto i : indices)
    if (i >= m) throw RouteError("bucket " + std::to_string(spec.bucket) + ": index " + std::to_string(i) + " out of range");
  ad::NoGradGuard no_grad;
  return render(gen, spec.base, spec.bucket, indices, routes);
}

io::CsvWriter DiversityReport::to_csv() const {
  io::CsvWriter csv({"bucket", "metric", "mean_ratio", "std_ratio", "routes"});
  for (const auto& r : ratios) {
    csv.add_row({std::to_string(r.bucket + 1), metric, io::format_number(r.mean), io::format_number(r.std),
                 std::to_string(routes_used)});
  }
  return csv;
}

template <typename T>
DiversityReport diversity_ratio(const Generator<T>& gen, const PairwiseMetric<T>& metric,
                                const std::string& metric_name, const std::vector<Route>& base_routes,
                                std::size_t k, Rng& rng) {
  const std::size_t n = gen.bucket_count();
  if (k < 2) throw ad::ContractError("diversity_ratio needs at least 2 images per bucket");
  for (std::size_t b = 0; b < n; ++b)
    if (gen.bucket(b).size() < k) {
      throw ad::ContractError("bucket " + std::to_string(b) + " has " + std::to_string(gen.bucket(b).size()) +
                              " instances, fewer than the " + std::to_string(k) + " images per bucket");
    }
  if (base_routes.empty()) throw ad::ContractError("diversity_ratio needs at least one route");
  for (const auto& r : base_routes) gen.validate(r);

  // All randomness is drawn up front so the parallel loop is deterministic.
  std::vector<std::vector<std::vector<std::size_t>>> choices(base_routes.size());
  for (auto& per_route : choices)
    for (std::size_t b = 0; b < n; ++b) per_route.push_back(sample_without_replacement(gen.bucket(b).size(), k, rng));

  std::vector<std::optional<std::vector<double>>> ratios(base_routes.size());
  std::exception_ptr failure;
  const long count = static_cast<long>(base_routes.size());
#pragma omp parallel for schedule(dynamic)
  for (long r = 0; r < count; ++r) {
    try {
      ad::NoGradGuard no_grad;
      std::vector<double> sums(n);
      for (std::size_t b = 0; b < n; ++b)
        sums[b] = ordered_pair_sum(metric(render(gen, base_routes[r], b, choices[r][b], nullptr)));
      if (sums[0] == 0.0) continue;
      std::vector<double> d(n);
      for (std::size_t b = 0; b < n; ++b) d[b] = sums[b] / sums[0];
      ratios[r] = std::move(d);
    } catch (...) {
#pragma omp critical
      failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  DiversityReport report;
  report.metric = metric_name;
  report.routes_requested = base_routes.size();
  report.images_per_bucket = k;
  for (const auto& r : ratios) (r ? report.routes_used : report.routes_skipped)++;
  if (2 * report.routes_skipped > report.routes_requested) {
    throw std::runtime_error(std::to_string(report.routes_skipped) + " of " +
                             std::to_string(report.routes_requested) +
                             " routes have zero first-bucket diversity; the ratio is undefined");
  }
  for (std::size_t b = 0; b < n; ++b) {
    double s1 = 0.0, s2 = 0.0;
    for (const auto& r : ratios)
      if (r) s1 += (*r)[b];
    const double mean = s1 / static_cast<double>(report.routes_used);
    for (const auto& r : ratios)
      if (r) s2 += ((*r)[b] - mean) * ((*r)[b] - mean);
    report.ratios.push_back({b, mean, std::sqrt(s2 / static_cast<double>(report.routes_used))});
  }
  return report;
}

template <typename T>
DiversityReport diversity_ratio(const Generator<T>& gen, const PairwiseMetric<T>& metric,
                                const std::string& metric_name, std::size_t routes, std::size_t k,
                                Rng& rng) {
  std::vector<Route> base;
  for (std::size_t i = 0; i < routes; ++i) base.push_back(gen.sample_route(rng));
  return diversity_ratio(gen, metric, metric_name, base, k, rng);
}

template <typename T>
Generator<T> noise_inject(const Generator<T>& gen, std::size_t layer, double sigma, Rng& rng) {
  for (std::size_t b = 0; b < gen.bucket_count(); ++b)
    if (gen.bucket(b).size() != 1) {
      throw ad::ContractError("noise_inject applies to single-instance generators; bucket " +
                              std::to_string(b) + " has " + std::to_string(gen.bucket(b).size()));
    }
  if (layer >= gen.bucket_count()) throw RouteError("layer " + std::to_string(layer) + " out of range");
  if (!(sigma >= 0)) throw std::invalid_argument("noise sigma must be >= 0");
  Generator<T> out = gen;
  auto& inst = out.bucket(layer).instances[0];
  inst = inst.clone();
  if (sigma > 0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& p : inst.params)
      for (auto& v : p.tensor.mutable_data()) v = static_cast<T>(static_cast<double>(v) + noise(rng));
  }
  return out;
}

#define RPGAN_INSTANTIATE_RESPONSIBILITY(T)                                                          \
  template std::vector<Tensor<T>> freeze_and_vary(const Generator<T>&, const FrozenRouteSpec&,        \
                                                  std::size_t, Rng&, std::vector<Route>*);            \
  template DiversityReport diversity_ratio(const Generator<T>&, const PairwiseMetric<T>&,            \
                                           const std::string&, const std::vector<Route>&,            \
                                           std::size_t, Rng&);                                        \
  template DiversityReport diversity_ratio(const Generator<T>&, const PairwiseMetric<T>&,            \
                                           const std::string&, std::size_t, std::size_t, Rng&);       \
  template Generator<T> noise_inject(const Generator<T>&, std::size_t, double, Rng&);
RPGAN_INSTANTIATE_RESPONSIBILITY(float)
RPGAN_INSTANTIATE_RESPONSIBILITY(double)

}  // namespace rpgan::analysis
