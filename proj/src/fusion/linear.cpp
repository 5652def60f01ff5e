// SPDX-License-Identifier: Apache-2.0
#include "rpgan/fusion/linear.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "rpgan/autodiff/tensor.hpp"
#include "rpgan/kernels.hpp"

namespace rpgan::fusion {

FusionError::FusionError(std::size_t bucket, const std::string& what)
    : std::invalid_argument("bucket " + std::to_string(bucket) + ": " + what), bucket_(bucket) {}

VerificationError::VerificationError(double max_diff, double tolerance)
    : std::runtime_error("fused generator differs from the original: max abs diff " +
                         io::format_number(max_diff) + " exceeds " + io::format_number(tolerance)),
      max_diff_(max_diff) {}

GeneratorArch linear_arch(const std::vector<std::size_t>& widths,
                          const std::vector<std::size_t>& m, Shape out_shape, bool bias) {
  if (widths.size() < 2) throw std::invalid_argument("a linear generator needs at least two widths");
  if (m.size() + 1 != widths.size()) {
    throw std::invalid_argument(std::to_string(widths.size()) + " widths need " +
                                std::to_string(widths.size() - 1) + " instance counts, got " +
                                std::to_string(m.size()));
  }
  GeneratorArch arch;
  arch.z_shape = {widths[0]};
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const bool last = i + 2 == widths.size();
    auto spec = LayerSpec::fully_connected(widths[i], widths[i + 1], Activation::Identity,
                                           last ? out_shape : Shape{});
    spec.bias = bias;
    arch.layers.push_back(spec);
  }
  arch.instances = m;
  arch.output_activation = Activation::Tanh;
  arch.validate();
  return arch;
}

GeneratorArch mnist_linear_arch(bool bias) {
  return linear_arch({128, 128, 256, 512, 1024, 784}, {32, 32, 32, 16, 16}, {1, 28, 28}, bias);
}

void FusionPlan::validate(std::span<const std::size_t> counts) const {
  if (first > last || last >= counts.size()) {
    throw ad::ContractError("fusion range " + std::to_string(first) + ".." + std::to_string(last) +
                            " is outside the " + std::to_string(counts.size()) + " buckets");
  }
  if (selection.empty()) throw ad::ContractError("fusion plan selects no tuples");
  for (const auto& tuple : selection) {
    if (tuple.size() != span()) {
      throw ad::ContractError("fusion tuple has " + std::to_string(tuple.size()) +
                              " entries for a range of " + std::to_string(span()));
    }
    for (std::size_t k = 0; k < tuple.size(); ++k)
      if (tuple[k] >= counts[first + k]) {
        throw RouteError("bucket " + std::to_string(first + k) + ": index " +
                         std::to_string(tuple[k]) + " out of range (m = " +
                         std::to_string(counts[first + k]) + ")");
      }
  }
}

FusionPlan FusionPlan::random(std::span<const std::size_t> counts, std::size_t first,
                              std::size_t last, std::size_t count, Rng& rng) {
  FusionPlan plan{first, last, {}};
  if (first > last || last >= counts.size()) {
    plan.selection.push_back({});
    plan.validate(counts);  // throws the range error
  }
  BigInt total = 1;
  for (std::size_t b = first; b <= last; ++b) total *= counts[b];
  if (count == 0 || BigInt(count) > total) {
    throw ad::ContractError("cannot draw " + std::to_string(count) + " distinct tuples from " +
                            total.str() + " combinations");
  }
  std::set<std::vector<std::size_t>> seen;
  while (plan.selection.size() < count) {
    std::vector<std::size_t> tuple;
    for (std::size_t b = first; b <= last; ++b) tuple.push_back(uniform_index(rng, counts[b]));
    if (seen.insert(tuple).second) plan.selection.push_back(std::move(tuple));
  }
  return plan;
}

Route expand_route(const FusionPlan& plan, const Route& fused) {
  if (fused.size() <= plan.first || fused[plan.first] >= plan.selection.size()) {
    throw RouteError("fused route " + to_string(fused) + " does not fit the plan");
  }
  Route out;
  for (std::size_t b = 0; b < plan.first; ++b) out.indices.push_back(fused[b]);
  for (auto i : plan.selection[fused[plan.first]]) out.indices.push_back(i);
  for (std::size_t b = plan.first + 1; b < fused.size(); ++b) out.indices.push_back(fused[b]);
  return out;
}

namespace {

// Row-major [rows x cols] matrix in double precision.
struct Affine {
  std::size_t rows = 0, cols = 0;
  std::vector<double> w;
  std::vector<double> b;  // cols entries
};

template <typename T>
Affine to_affine(const Instance<T>& inst) {
  Affine a{inst.spec.in_features, inst.spec.out_features, {}, {}};
  for (T v : inst.param("weight").data()) a.w.push_back(static_cast<double>(v));
  a.b.assign(a.cols, 0.0);
  if (inst.spec.bias) {
    const auto bias = inst.param("bias").data();
    std::copy(bias.begin(), bias.end(), a.b.begin());
  }
  return a;
}

// x -> (x W1 + b1) W2 + b2 = x (W1 W2) + (b1 W2 + b2)
Affine then(const Affine& a, const Affine& next) {
  Affine out{a.rows, next.cols, std::vector<double>(a.rows * next.cols, 0.0), next.b};
  kernels::parallel::gemm<double>(a.w, next.w, out.w, a.rows, a.cols, next.cols);
  for (std::size_t k = 0; k < a.cols; ++k)
    for (std::size_t j = 0; j < next.cols; ++j) out.b[j] += a.b[k] * next.w[k * next.cols + j];
  return out;
}

template <typename T>
Tensor<T> to_tensor(Shape shape, const std::vector<double>& values) {
  std::vector<T> v(values.size());
  std::transform(values.begin(), values.end(), v.begin(), [](double x) { return static_cast<T>(x); });
  return Tensor<T>(std::move(shape), std::move(v), true);
}

}  // namespace

template <typename T>
Generator<T> fuse_buckets(const Generator<T>& gen, const FusionPlan& plan) {
  plan.validate(gen.instance_counts());
  bool bias = false;
  for (std::size_t b = plan.first; b <= plan.last; ++b) {
    const auto& spec = gen.bucket(b).spec;
    if (spec.kind != InstanceKind::FullyConnected) {
      throw FusionError(b, std::string(to_string(spec.kind)) +
                               " buckets cannot be fused; only fully-connected ones can");
    }
    if (!spec.linear()) {
      throw FusionError(b, "applies a " + std::string(to_string(spec.activation)) +
                               " nonlinearity, so the range is not a linear map");
    }
    bias = bias || spec.bias;
  }
  const auto& head = gen.bucket(plan.first).spec;
  const auto& tail = gen.bucket(plan.last).spec;
  LayerSpec spec = LayerSpec::fully_connected(head.in_features, tail.out_features,
                                              Activation::Identity, tail.out_shape);
  spec.bias = bias;

  Bucket<T> fused{spec, {}};
  for (const auto& tuple : plan.selection) {
    Affine acc = to_affine(gen.bucket(plan.first).instances[tuple[0]]);
    for (std::size_t k = 1; k < tuple.size(); ++k)
      acc = then(acc, to_affine(gen.bucket(plan.first + k).instances[tuple[k]]));
    Instance<T> inst;
    inst.spec = spec;
    inst.params.push_back({"weight", to_tensor<T>({acc.rows, acc.cols}, acc.w)});
    if (bias) inst.params.push_back({"bias", to_tensor<T>({acc.cols}, acc.b)});
    fused.instances.push_back(std::move(inst));
  }

  std::vector<Bucket<T>> buckets;
  for (std::size_t b = 0; b < plan.first; ++b) buckets.push_back(gen.bucket(b));
  buckets.push_back(std::move(fused));
  for (std::size_t b = plan.last + 1; b < gen.bucket_count(); ++b) buckets.push_back(gen.bucket(b));
  Generator<T> out(gen.z(), std::move(buckets), gen.output_activation());
  out.set_z_trainable(gen.z_trainable());
  return out;
}

template <typename T>
double max_fusion_error(const Generator<T>& gen, const Generator<T>& fused, const FusionPlan& plan,
                        std::size_t tuples, std::size_t z_perturbations, Rng& rng) {
  ad::NoGradGuard no_grad;
  std::vector<Route> routes;
  for (std::size_t i = 0; i < tuples; ++i) routes.push_back(fused.sample_route(rng));
  std::vector<Route> expanded;
  for (const auto& r : routes) expanded.push_back(expand_route(plan, r));

  auto worst = [&](const Generator<T>& a, const Generator<T>& b) {
    auto x = b.forward_batch(routes);
    auto y = a.forward_batch(expanded);
    double diff = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i)
      diff = std::max(diff, std::abs(static_cast<double>(x[i]) - static_cast<double>(y[i])));
    return diff;
  };
  double diff = worst(gen, fused);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t p = 0; p < z_perturbations; ++p) {
    auto z = gen.z().clone();
    for (auto& v : z.mutable_data()) v = static_cast<T>(v + normal(rng));
    Generator<T> a = gen, b = fused;
    a.set_z(z);
    b.set_z(z);
    diff = std::max(diff, worst(a, b));
  }
  return diff;
}

template <typename T>
std::size_t range_macs(const Generator<T>& gen, std::size_t first, std::size_t last) {
  std::size_t total = 0;
  for (std::size_t b = first; b <= last; ++b) total += gen.bucket(b).spec.macs(gen.input_shape(b));
  return total;
}

io::CsvWriter BenchReport::to_csv() const {
  io::CsvWriter csv({"variant", "batch", "ns_per_image", "flops", "speedup"});
  csv.add_row({"composed", std::to_string(batch), io::format_number(ns_composed),
               std::to_string(macs_composed), io::format_number(1.0)});
  csv.add_row({"fused", std::to_string(batch), io::format_number(ns_fused),
               std::to_string(macs_fused), io::format_number(speedup())});
  return csv;
}

namespace {

template <typename T>
double median_ns_per_image(const Generator<T>& gen, const std::vector<Route>& routes,
                           std::size_t reps) {
  using clock = std::chrono::steady_clock;
  for (int w = 0; w < 3; ++w) gen.forward_batch(routes);
  std::vector<double> samples;
  for (std::size_t r = 0; r < reps; ++r) {
    const auto start = clock::now();
    auto out = gen.forward_batch(routes);
    const auto stop = clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(stop - start).count());
  }
  std::nth_element(samples.begin(), samples.begin() + samples.size() / 2, samples.end());
  return samples[samples.size() / 2] / static_cast<double>(routes.size());
}

}  // namespace

template <typename T>
BenchReport benchmark_fusion(const Generator<T>& gen, const Generator<T>& fused,
                             const FusionPlan& plan, std::size_t batch, std::size_t reps, Rng& rng,
                             double tolerance) {
  if (batch == 0 || reps == 0) throw ad::ContractError("benchmark needs batch >= 1 and reps >= 1");
  BenchReport report;
  report.batch = batch;
  report.reps = reps;
  report.max_abs_diff = max_fusion_error(gen, fused, plan, std::max<std::size_t>(batch, 50), 0, rng);
  if (!(report.max_abs_diff <= tolerance)) throw VerificationError(report.max_abs_diff, tolerance);
  report.macs_composed = range_macs(gen, plan.first, plan.last);
  report.macs_fused = range_macs(fused, plan.first, plan.first);

  std::vector<Route> routes, expanded;
  for (std::size_t i = 0; i < batch; ++i) {
    routes.push_back(fused.sample_route(rng));
    expanded.push_back(expand_route(plan, routes.back()));
  }
  const int saved = kernels::thread_cap();
  kernels::set_max_threads(1);
  ad::NoGradGuard no_grad;
  report.ns_composed = median_ns_per_image(gen, expanded, reps);
  report.ns_fused = median_ns_per_image(fused, routes, reps);
  kernels::set_max_threads(saved);
  return report;
}

#define RPGAN_FUSION_INSTANTIATE(T)                                                             \
  template Generator<T> fuse_buckets(const Generator<T>&, const FusionPlan&);                   \
  template double max_fusion_error(const Generator<T>&, const Generator<T>&, const FusionPlan&, \
                                   std::size_t, std::size_t, Rng&);                             \
  template std::size_t range_macs(const Generator<T>&, std::size_t, std::size_t);              \
  template BenchReport benchmark_fusion(const Generator<T>&, const Generator<T>&,               \
                                        const FusionPlan&, std::size_t, std::size_t, Rng&, double);
RPGAN_FUSION_INSTANTIATE(float)
RPGAN_FUSION_INSTANTIATE(double)

}  // namespace rpgan::fusion
