// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <set>

#include "rpgan/analysis/metrics.hpp"
#include "rpgan/analysis/responsibility.hpp"
#include "rpgan/autodiff/tape.hpp"
#include "rpgan/train/trainer.hpp"
#include "support/builders.hpp"

namespace rpgan::analysis {
namespace {

// Pixel value whose byte is b under the [-1,1] -> [0,255] floor map.
float pixel_for_byte(int b) { return static_cast<float>((b + 0.5) / 127.5 - 1.0); }

Tensor<float> image_of_bytes(const std::vector<int>& bytes) {
  std::vector<float> v;
  for (int b : bytes) v.push_back(pixel_for_byte(b));
  return Tensor<float>({1, 1, bytes.size()}, v);
}

TEST(Hellinger, HandValues) {
  auto a = image_of_bytes({0, 0, 5, 9});
  EXPECT_EQ(hellinger_color_distance(a, a), std::vector<double>{0.0});
  // Bin 0 holds bytes 0..10, bin 1 holds 11..20, bin 2 holds 21..30.
  auto b = image_of_bytes({12, 15, 20, 11});
  EXPECT_NEAR(hellinger_color_distance(a, b)[0], 1.0, 1e-12);
  auto p = image_of_bytes({0, 0, 15, 15});
  auto q = image_of_bytes({0, 0, 25, 25});
  EXPECT_NEAR(hellinger_color_distance(p, q)[0], std::sqrt(0.5), 1e-6);
  std::vector<double> hp(kColorBins, 0.0), hq(kColorBins, 0.0);
  hp[0] = hp[1] = 0.5;
  hq[0] = hq[2] = 0.5;
  EXPECT_NEAR(hellinger(hp, hq), 0.70710678, 1e-6);
}

TEST(Hellinger, EndpointsAndChannels) {
  auto hist = color_histogram<float>(std::vector<float>{-1.0f, 1.0f, 7.0f, -3.0f});
  EXPECT_DOUBLE_EQ(hist[0], 0.5);
  EXPECT_DOUBLE_EQ(hist[kColorBins - 1], 0.5);
  auto rgb = Tensor<float>::zeros({3, 2, 2});
  auto other = rgb.clone();
  other.mutable_data()[4] = 1.0f;  // one pixel of channel 1
  auto d = hellinger_color_distance(rgb, other);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d[0], 0.0);
  EXPECT_GT(d[1], 0.0);
  EXPECT_EQ(d[2], 0.0);
  EXPECT_THROW(hellinger_color_distance(Tensor<float>({0}, {}), Tensor<float>({0}, {})), ad::ContractError);
}

TEST(Hellinger, MetricAxiomsOnRandomHistograms) {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto random_hist = [&]() {
    std::vector<double> h(kColorBins);
    double s = 0;
    for (auto& v : h) s += (v = u(rng) < 0.3 ? 0.0 : u(rng));
    if (s == 0) h[0] = s = 1;
    for (auto& v : h) v /= s;
    return h;
  };
  for (int t = 0; t < 1000; ++t) {
    auto p = random_hist(), q = random_hist(), r = random_hist();
    const double pq = hellinger(p, q), qr = hellinger(q, r), pr = hellinger(p, r);
    EXPECT_GE(pq, 0.0);
    EXPECT_LE(pq, 1.0 + 1e-12);
    EXPECT_EQ(pq, hellinger(q, p));
    EXPECT_EQ(hellinger(p, p), 0.0);
    EXPECT_LE(pr, pq + qr + 1e-9);
  }
}

train::Discriminator<float> trained_disc(Rng& rng) {
  auto disc = train::Discriminator<float>::create({{3, 8, 8}, {4}, {8}}, rng);
  disc.mark_trained();
  return disc;
}

Tensor<float> random_image(Rng& rng) {
  std::vector<float> v(3 * 8 * 8);
  for (auto& x : v) x = std::uniform_real_distribution<float>(-1, 1)(rng);
  return Tensor<float>({3, 8, 8}, v);
}

TEST(Semantic, ZeroSymmetricBounded) {
  Rng rng(2);
  auto disc = trained_disc(rng);
  for (int t = 0; t < 100; ++t) {
    auto a = random_image(rng), b = random_image(rng);
    EXPECT_EQ(semantic_distance(a, a, &disc), 0.0);
    const double ab = semantic_distance(a, b, &disc);
    EXPECT_NEAR(ab, semantic_distance(b, a, &disc), 1e-7);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 2.0);
  }
}

TEST(Semantic, RequiresTrainedDiscriminator) {
  Rng rng(3);
  auto untrained = train::Discriminator<float>::create({{3, 8, 8}, {4}, {8}}, rng);
  auto a = random_image(rng);
  try {
    semantic_distance(a, a, &untrained);
    FAIL();
  } catch (const MetricUnavailable& e) {
    EXPECT_NE(std::string(e.what()).find("pixel"), std::string::npos);
  }
  EXPECT_THROW(make_metric<float>(Metric::Semantic, nullptr), MetricUnavailable);
}

TEST(FreezeAndVary, SingletonBucketGivesForwardOfBase) {
  Rng rng(4);
  auto gen = Generator<float>::create(testing::conv_arch({1, 3, 2}), rng);
  Route base{{0, 2, 1}};
  auto imgs = freeze_and_vary(gen, {base, 0, {}}, 1, rng);
  ASSERT_EQ(imgs.size(), 1u);
  EXPECT_EQ(imgs[0].values(), gen.forward(base).values());
}

TEST(FreezeAndVary, FullRowAndReplay) {
  Rng rng(5);
  auto gen = Generator<float>::create(testing::conv_arch({4, 5, 2}), rng);
  Route base{{3, 1, 0}};
  std::vector<Route> routes;
  auto imgs = freeze_and_vary(gen, {base, 1, {}}, 5, rng, &routes);
  std::set<std::size_t> seen;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    EXPECT_EQ(routes[i][0], 3u);
    EXPECT_EQ(routes[i][2], 0u);
    seen.insert(routes[i][1]);
    EXPECT_EQ(imgs[i].values(), gen.forward(routes[i]).values());
  }
  EXPECT_EQ(seen.size(), 5u);
  EXPECT_THROW(freeze_and_vary(gen, {base, 1, {}}, 6, rng), ad::ContractError);
  auto subset = freeze_and_vary(gen, {base, 0, {2, 0}}, 0, rng, &routes);
  EXPECT_EQ(routes[0][0], 2u);
  EXPECT_EQ(routes[1][0], 0u);
}

// Two buckets, m = (3, 3), tiny image outputs; parameters are seeded draws.
Generator<double> two_bucket_toy(std::uint64_t seed) {
  GeneratorArch arch;
  arch.z_shape = {3};
  arch.layers = {LayerSpec::fully_connected(3, 6, Activation::Tanh),
                 LayerSpec::fully_connected(6, 4, Activation::Identity, {1, 2, 2})};
  arch.instances = {3, 3};
  arch.output_activation = Activation::Tanh;
  Rng rng(seed);
  return Generator<double>::create(arch, rng);
}

double rms(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / a.numel());
}

TEST(DiversityRatio, MatchesBruteForceEnumeration) {
  auto gen = two_bucket_toy(6);
  std::vector<Route> all;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) all.push_back(Route{{a, b}});
  // Oracle: unordered pairs, all instances, averaged over every base route.
  std::vector<double> oracle(2, 0.0);
  for (const auto& base : all) {
    double sums[2] = {0, 0};
    for (std::size_t l = 0; l < 2; ++l)
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) {
          Route ri = base, rj = base;
          ri.indices[l] = i;
          rj.indices[l] = j;
          sums[l] += rms(gen.forward(ri), gen.forward(rj));
        }
    oracle[0] += sums[0] / sums[0] / all.size();
    oracle[1] += sums[1] / sums[0] / all.size();
  }
  Rng rng(7);
  auto report = diversity_ratio(gen, make_metric<double>(Metric::Pixel), "pixel", all, 3, rng);
  EXPECT_EQ(report.routes_used, 9u);
  EXPECT_EQ(report.ratios[0].mean, 1.0);
  EXPECT_EQ(report.ratios[0].std, 0.0);
  EXPECT_NEAR(report.ratios[1].mean, oracle[1], 1e-9);
}

TEST(DiversityRatio, FirstBucketIsOneAndIdenticalBucketIsZero) {
  Rng rng(8);
  auto gen = Generator<float>::create(testing::conv_arch({4, 4, 4}), rng);
  auto& last = gen.bucket(2);
  for (auto& inst : last.instances) inst = last.instances[0].clone();
  for (auto metric : {Metric::Color, Metric::Pixel}) {
    auto report = diversity_ratio(gen, make_metric<float>(metric), std::string(to_string(metric)), 20, 4, rng);
    EXPECT_EQ(report.ratios[0].mean, 1.0);
    EXPECT_EQ(report.ratios[2].mean, 0.0);
    EXPECT_EQ(report.routes_used + report.routes_skipped, 20u);
  }
}

TEST(DiversityRatio, InvariantToInstanceRelabeling) {
  auto gen = two_bucket_toy(9);
  auto permuted = gen.clone();
  std::swap(permuted.bucket(1).instances[0], permuted.bucket(1).instances[2]);
  std::swap(permuted.bucket(0).instances[0], permuted.bucket(0).instances[1]);
  std::vector<Route> all, relabeled;
  const std::size_t map0[3] = {1, 0, 2}, map1[3] = {2, 1, 0};
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      all.push_back(Route{{a, b}});
      relabeled.push_back(Route{{map0[a], map1[b]}});
    }
  Rng r1(10), r2(10);
  auto metric = make_metric<double>(Metric::Color);
  auto a = diversity_ratio(gen, metric, "color", all, 3, r1);
  auto b = diversity_ratio(permuted, metric, "color", relabeled, 3, r2);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_NEAR(a.ratios[l].mean, b.ratios[l].mean, 1e-12);
}

TEST(DiversityRatio, ThreadCountDoesNotChangeResult) {
  Rng rng(11);
  auto gen = Generator<float>::create(testing::conv_arch({4, 4, 4}), rng);
  auto metric = make_metric<float>(Metric::Color);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  Rng a(12);
  auto one = diversity_ratio(gen, metric, "color", 16, 4, a).to_csv().str();
  omp_set_num_threads(4);
  Rng b(12);
  auto four = diversity_ratio(gen, metric, "color", 16, 4, b).to_csv().str();
  omp_set_num_threads(saved);
  EXPECT_EQ(one, four);
}

TEST(DiversityRatio, ContractsAndSkips) {
  Rng rng(13);
  auto gen = Generator<float>::create(testing::conv_arch({4, 2, 4}), rng);
  auto metric = make_metric<float>(Metric::Pixel);
  EXPECT_THROW(diversity_ratio(gen, metric, "pixel", 5, 4, rng), ad::ContractError);
  auto flat = Generator<float>::create(testing::conv_arch({4, 4, 4}), rng);
  for (auto& inst : flat.bucket(0).instances) inst = flat.bucket(0).instances[0].clone();
  EXPECT_THROW(diversity_ratio(flat, metric, "pixel", 5, 4, rng), std::runtime_error);
  auto csv = diversity_ratio(Generator<float>::create(testing::conv_arch({4, 4, 4}), rng), metric, "pixel", 5, 4, rng).to_csv();
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')), "bucket,metric,mean_ratio,std_ratio,routes");
  EXPECT_EQ(csv.rows(), 3u);
}

TEST(NoiseInject, ZeroSigmaAndIsolation) {
  Rng rng(14);
  auto gen = Generator<float>::create(testing::conv_arch({1, 1, 1}), rng);
  const Route r{{0, 0, 0}};
  auto same = noise_inject(gen, 1, 0.0, rng);
  EXPECT_EQ(same.forward(r).values(), gen.forward(r).values());
  auto noisy = noise_inject(gen, 1, 0.5, rng);
  for (std::size_t b = 0; b < 3; ++b) {
    const auto& p0 = gen.bucket(b).instances[0].params;
    const auto& p1 = noisy.bucket(b).instances[0].params;
    for (std::size_t i = 0; i < p0.size(); ++i) {
      if (b == 1) EXPECT_NE(p0[i].tensor.values(), p1[i].tensor.values());
      else EXPECT_TRUE(p0[i].tensor.same_storage(p1[i].tensor));
    }
  }
  EXPECT_EQ(gen.bucket(1).instances[0].params[0].tensor.values(),
            same.bucket(1).instances[0].params[0].tensor.values());
  auto multi = Generator<float>::create(testing::conv_arch({2, 1, 1}), rng);
  EXPECT_THROW(noise_inject(multi, 0, 0.1, rng), ad::ContractError);
}

TEST(NoiseInject, DistanceGrowsWithSigmaOnTrainedToy) {
  Rng rng(15);
  auto data = io::synth_mixture(8, 0.75, 0.05, 1024, rng);
  auto gen = Generator<float>::create(testing::mlp_arch({1, 1, 1}), rng);
  auto disc = train::Discriminator<float>::create({{2}, {}, {16, 16}}, rng);
  train::TrainConfig cfg;
  cfg.steps = 200;
  cfg.d_steps = 1;
  cfg.batch = 32;
  train::train(gen, disc, data, cfg);
  const Route r{{0, 0, 0}};
  const auto base = gen.forward(r);
  for (std::size_t layer = 0; layer < 3; ++layer) {
    double previous = 0.0;
    for (double sigma : {0.01, 0.1, 1.0}) {
      double total = 0.0;
      for (int s = 0; s < 64; ++s) {
        auto out = noise_inject(gen, layer, sigma, rng).forward(r);
        double d = 0;
        for (std::size_t i = 0; i < out.numel(); ++i) d += std::pow(out[i] - base[i], 2);
        total += std::sqrt(d);
      }
      EXPECT_GT(total / 64, previous) << "layer " << layer << " sigma " << sigma;
      previous = total / 64;
    }
  }
}

}  // namespace
}  // namespace rpgan::analysis
