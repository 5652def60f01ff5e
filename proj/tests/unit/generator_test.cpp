// SPDX-License-Identifier: Apache-2.0
#include "rpgan/core/generator.hpp"

#include <gtest/gtest.h>

#include <set>

#include "rpgan/autodiff/ops.hpp"
#include "rpgan/autodiff/tape.hpp"
#include "support/builders.hpp"
#include "support/gradcheck.hpp"

namespace rpgan {
namespace {

using testing::conv_arch;
using testing::mlp_arch;
using testing::scalar_chain;

TEST(SampleRoute, SingletonBucketsAlwaysZero) {
  Rng rng(1);
  auto gen = Generator<float>::create(mlp_arch({1, 1, 1}), rng);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(gen.sample_route(rng), (Route{{0, 0, 0}}));
}

TEST(SampleRoute, UniformPerBucketChiSquare) {
  Rng rng(2);
  auto gen = scalar_chain<double>({{1, 1, 1, 1}, {1, 1, 1, 1}});
  std::vector<std::vector<int>> counts(2, std::vector<int>(4, 0));
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto r = gen.sample_route(rng);
    counts[0][r[0]]++;
    counts[1][r[1]]++;
  }
  for (const auto& c : counts) {
    double chi2 = 0;
    for (int v : c) chi2 += (v - draws / 4.0) * (v - draws / 4.0) / (draws / 4.0);
    EXPECT_LT(chi2, 16.266);  // 99.9% quantile, 3 degrees of freedom
  }
}

TEST(SampleRoute, SeedDeterminism) {
  auto gen = scalar_chain<double>({{1, 1, 1}, {1, 1}, {1, 1, 1, 1, 1}});
  Rng a(42), b(42);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(gen.sample_route(a), gen.sample_route(b));
}

TEST(Forward, HandComposition) {
  auto gen = scalar_chain<double>({{2, 3}, {5, 7}});
  EXPECT_EQ(gen.forward(Route{{0, 1}}).item(), 14.0);
  EXPECT_EQ(gen.forward(Route{{1, 0}}).item(), 15.0);
}

TEST(Forward, InvalidRouteNamesBucketAndIndex) {
  auto gen = scalar_chain<double>({{2, 3}, {5, 7}});
  try {
    gen.forward(Route{{0, 2}});
    FAIL();
  } catch (const RouteError& e) {
    EXPECT_NE(std::string(e.what()).find("bucket 1: index 2"), std::string::npos);
  }
  EXPECT_THROW(gen.forward(Route{{0}}), RouteError);
}

TEST(Forward, DeterministicAndShapeConstantOverAllRoutes) {
  Rng rng(3);
  auto gen = Generator<float>::create(conv_arch({3, 2, 2}), rng);
  EXPECT_EQ(gen.output_shape(), (Shape{3, 8, 8}));
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t c = 0; c < 2; ++c) {
        Route r{{a, b, c}};
        auto first = gen.forward(r);
        EXPECT_EQ(first.shape(), gen.output_shape());
        EXPECT_EQ(first.values(), gen.forward(r).values());
      }
}

TEST(BatchForward, SizeOneEqualsForwardOfSampledRoute) {
  Rng rng(4);
  auto gen = Generator<float>::create(mlp_arch({4, 4, 4}), rng);
  Rng a(10), b(10);
  auto [batch, routes] = gen.batch_forward(1, a);
  auto single = gen.forward(gen.sample_route(b));
  EXPECT_EQ(routes.size(), 1u);
  EXPECT_EQ(batch.values(), single.values());
}

TEST(BatchForward, SingletonBucketsGiveIdenticalImages) {
  Rng rng(5);
  auto gen = Generator<float>::create(conv_arch({1, 1, 1}), rng);
  auto [batch, routes] = gen.batch_forward(8, rng);
  const std::size_t width = batch.numel() / 8;
  for (std::size_t r = 1; r < 8; ++r)
    for (std::size_t j = 0; j < width; ++j) ASSERT_EQ(batch[r * width + j], batch[j]);
}

TEST(BatchForward, EverySampleReplaysFromItsRoute) {
  Rng rng(6);
  for (const auto& arch : {mlp_arch({5, 3, 4}), conv_arch({3, 4, 2})}) {
    auto gen = Generator<float>::create(arch, rng);
    auto [batch, routes] = gen.batch_forward(64, rng);
    const std::size_t width = batch.numel() / 64;
    for (std::size_t r = 0; r < 64; ++r) {
      auto replay = gen.forward(routes[r]);
      for (std::size_t j = 0; j < width; ++j) ASSERT_EQ(batch[r * width + j], replay[j]);
    }
  }
}

TEST(Forward, SingletonGeneratorEqualsPlainNetwork) {
  // A plain generator written directly with tensor ops, sharing the weights.
  Rng rng(7);
  auto gen = Generator<double>::create(mlp_arch({1, 1, 1}), rng);
  const auto& b0 = gen.bucket(0).instances[0];
  const auto& b1 = gen.bucket(1).instances[0];
  const auto& b2 = gen.bucket(2).instances[0];
  auto h = ad::reshape(gen.z(), {1, 8});
  h = ad::relu(ad::add_row_bias(ad::matmul(h, b0.param("weight")), b0.param("bias")));
  h = ad::relu(ad::add_row_bias(ad::matmul(h, b1.param("weight")), b1.param("bias")));
  h = ad::tanh(ad::add_row_bias(ad::matmul(h, b2.param("weight")), b2.param("bias")));
  EXPECT_EQ(gen.forward(Route{{0, 0, 0}}).values(), h.values());
}

TEST(Forward, DistinctImagesBoundedByCardinality) {
  auto gen = scalar_chain<double>({{1, 2, 3}, {2, 3}});  // 2*3 and 3*2 coincide
  std::set<double> images;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 2; ++b) images.insert(gen.forward(Route{{a, b}}).item());
  EXPECT_LE(images.size(), latent_cardinality(gen).convert_to<std::size_t>());
  EXPECT_EQ(images.size(), 5u);
}

TEST(Latent, CardinalityAndCoverage) {
  const std::vector<std::size_t> cifar(5, 40), anime(6, 20), mnist{20, 20, 20, 8};
  EXPECT_EQ(latent_cardinality(cifar), BigInt(102400000));
  EXPECT_EQ(coverage(cifar, 50000), 2048.0);
  EXPECT_EQ(latent_cardinality(mnist), BigInt(64000));
  EXPECT_EQ(latent_cardinality(std::vector<std::size_t>{1, 1, 1}), BigInt(1));
  EXPECT_DOUBLE_EQ(coverage(std::vector<std::size_t>{1}, 10), 0.1);
  EXPECT_NEAR(coverage(anime, 21551), 2970.0, 0.5);
  EXPECT_THROW(coverage(cifar, 0), std::invalid_argument);
  // Exceeds 64 bits.
  const std::vector<std::size_t> huge(20, 1000);
  EXPECT_EQ(latent_cardinality(huge), boost::multiprecision::pow(BigInt(1000), 20));
}

TEST(DiversityLoss, IdenticalInstancesGiveZero) {
  auto gen = scalar_chain<double>({{1.5, 1.5, 1.5}, {-2, -2}});
  EXPECT_EQ(diversity_loss(gen).item(), 0.0);
  Rng rng(8);
  auto conv = Generator<double>::create(conv_arch({3, 1, 1}), rng);
  auto& bucket = conv.bucket(0);
  for (auto& inst : bucket.instances) inst = bucket.instances[0].clone();
  EXPECT_EQ(diversity_loss(conv).item(), 0.0);
}

TEST(DiversityLoss, TwoScalarInstances) {
  auto gen = scalar_chain<double>({{1.0, 3.0}});
  EXPECT_DOUBLE_EQ(diversity_loss(gen).item(), -4.0);
}

TEST(DiversityLoss, PerLayerScaleInvariance) {
  Rng rng(9);
  auto gen = Generator<double>::create(mlp_arch({3, 4, 2}), rng);
  const double before = diversity_loss(gen).item();
  auto scaled = gen.clone();
  for (auto& inst : scaled.bucket(1).instances)
    for (auto& p : inst.params)
      if (p.name == "weight")
        for (auto& v : p.tensor.mutable_data()) v *= -3.7;
  EXPECT_NEAR(diversity_loss(scaled).item(), before, 1e-6 * std::abs(before));
}

TEST(DiversityLoss, GradientMatchesFrozenNormalizerDifferences) {
  // The normalizer is held constant during differentiation, so the oracle
  // freezes it at the current value and differentiates the pair sum only.
  auto gen = scalar_chain<double>({{0.3, -1.2, 2.0}, {0.7, 1.9}});
  auto loss = diversity_loss(gen);
  ad::backward(loss);
  auto pooled_var = [&](std::size_t b) {
    double mu = 0, s = 0;
    const auto& insts = gen.bucket(b).instances;
    for (const auto& i : insts) mu += i.params[0].tensor[0];
    mu /= insts.size();
    for (const auto& i : insts) s += std::pow(i.params[0].tensor[0] - mu, 2);
    return s / insts.size();
  };
  const double var[2] = {pooled_var(0), pooled_var(1)};
  auto oracle = [&]() {
    double total = 0;
    for (std::size_t b = 0; b < 2; ++b) {
      const auto& insts = gen.bucket(b).instances;
      for (std::size_t i = 0; i < insts.size(); ++i)
        for (std::size_t j = i + 1; j < insts.size(); ++j)
          total -= std::pow(insts[i].params[0].tensor[0] - insts[j].params[0].tensor[0], 2) / var[b];
    }
    return total;
  };
  EXPECT_DOUBLE_EQ(oracle(), loss.item());
  const double h = 1e-5;
  for (std::size_t b = 0; b < 2; ++b)
    for (auto& inst : gen.bucket(b).instances) {
      auto t = inst.params[0].tensor;
      auto data = t.mutable_data();
      const double saved = data[0];
      data[0] = saved + h;
      const double plus = oracle();
      data[0] = saved - h;
      const double minus = oracle();
      data[0] = saved;
      EXPECT_LE(testing::relative_error(t.grad()[0], (plus - minus) / (2 * h)), 1e-4);
    }
}

TEST(DiversityLoss, SingletonBucketsContributeNothing) {
  auto gen = scalar_chain<double>({{1.0}, {1.0, 3.0}});
  EXPECT_DOUBLE_EQ(diversity_loss(gen).item(), -4.0);
}

TEST(Generator, ParametersListZFirstAndRespectTrainability) {
  Rng rng(10);
  auto gen = Generator<float>::create(mlp_arch({2, 1, 1}), rng);
  gen.bucket(0).instances[1].trainable = false;
  auto params = gen.parameters();
  EXPECT_EQ(params.front().name, "z");
  std::size_t frozen = 0;
  for (const auto& p : params) frozen += !p.trainable;
  EXPECT_EQ(frozen, 2u);  // weight + bias of b0.i1
}

TEST(Generator, RejectsShapeChainMismatch) {
  GeneratorArch arch = mlp_arch({1, 1, 1});
  arch.layers[1] = LayerSpec::fully_connected(5, 16, Activation::ReLU);
  Rng rng(11);
  EXPECT_THROW(Generator<float>::create(arch, rng), ad::ShapeError);
}

}  // namespace
}  // namespace rpgan
