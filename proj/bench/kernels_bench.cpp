// SPDX-License-Identifier: Apache-2.0
// Serial reference vs OpenMP kernels, plus the fused/composed linear range.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rpgan/autodiff/tape.hpp"
#include "rpgan/fusion/linear.hpp"
#include "rpgan/kernels.hpp"

namespace {

using namespace rpgan;

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::gemm<float>(a, b, c, n, n, n);
    } else {
      kernels::serial::gemm<float>(a, b, c, n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(64)->Arg(256)->Arg(512);

template <bool Parallel>
void BM_Conv(benchmark::State& state) {
  kernels::ConvGeometry g;
  g.batch = 16;
  g.in_channels = g.filters = static_cast<std::size_t>(state.range(0));
  g.height = g.width = 16;
  g.kernel = 3;
  g.pad = 1;
  const auto x = random_values(g.batch * g.in_channels * g.height * g.width, 3);
  const auto w = random_values(g.filters * g.in_channels * 9, 4);
  std::vector<float> y(g.batch * g.filters * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::parallel::conv2d<float>(x, w, y, g);
    } else {
      kernels::serial::conv2d<float>(x, w, y, g);
    }
    benchmark::DoNotOptimize(y.data());
  }
}
BENCHMARK(BM_Conv<false>)->Name("conv3x3/serial")->Arg(16)->Arg(64);
BENCHMARK(BM_Conv<true>)->Name("conv3x3/parallel")->Arg(16)->Arg(64);

// Batch of 64 images through the fc MNIST generator, before and after
// fusing buckets 3..5 into 128 instances.
void BM_LinearGenerator(benchmark::State& state) {
  static const auto setup = [] {
    Rng rng(5);
    auto gen = Generator<float>::create(fusion::mnist_linear_arch(), rng);
    auto plan = fusion::FusionPlan::random(gen.instance_counts(), 2, 4, 128, rng);
    auto fused = fusion::fuse_buckets(gen, plan);
    std::vector<Route> routes;
    for (int i = 0; i < 64; ++i) routes.push_back(fused.sample_route(rng));
    std::vector<Route> expanded;
    for (const auto& r : routes) expanded.push_back(fusion::expand_route(plan, r));
    return std::tuple{gen, fused, routes, expanded};
  }();
  const auto& [gen, fused, routes, expanded] = setup;
  ad::NoGradGuard no_grad;
  for (auto _ : state) {
    auto out = state.range(0) ? fused.forward_batch(routes) : gen.forward_batch(expanded);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_LinearGenerator)->Name("mnist_fc/composed")->Arg(0)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LinearGenerator)->Name("mnist_fc/fused")->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
