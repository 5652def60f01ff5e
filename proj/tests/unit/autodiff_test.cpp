// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <random>
#include <unordered_set>

#include "rpgan/autodiff/ops.hpp"
#include "rpgan/autodiff/tape.hpp"
#include "support/gradcheck.hpp"
#include "support/op_cases.hpp"

namespace rpgan::ad {
namespace {

using testing::LossFn;
using testing::max_gradient_error;
using testing::random_tensor;
using TD = Tensor<double>;

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(TD({2, 3}, std::vector<double>(5)), ShapeError);
  TD t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.numel(), 6u);
}

TEST(Matmul, IdentityAndHandCases) {
  TD eye({2, 2}, {1, 0, 0, 1});
  TD m({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye, m).values(), (std::vector<double>{1, 2, 3, 4}));
  TD row({1, 2}, {1, 2});
  TD col({2, 1}, {3, 4});
  EXPECT_EQ(matmul(row, col).values(), std::vector<double>{11});
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  TD a({2, 3}, std::vector<double>(6));
  TD b({2, 3}, std::vector<double>(6));
  try {
    matmul(a, b);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("and [2x3]"), std::string::npos);
  }
}

TEST(Matmul, SumGradientIsOnesTimesBTranspose) {
  std::mt19937_64 rng(3);
  auto a = random_tensor({5, 7}, rng);
  auto b = random_tensor({7, 3}, rng, -1, 1, false);
  backward(sum(matmul(a, b)));
  auto expected = matmul(TD::ones({5, 3}), transpose(b));
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.grad()[i], expected[i], 1e-12);
  LossFn f = [&](const std::vector<TD>& in) { return sum(matmul(in[0], b)); };
  EXPECT_LE(max_gradient_error(f, {a}), 1e-5);
}

TEST(Matmul, LinearInSecondArgument) {
  std::mt19937_64 rng(5);
  auto a = random_tensor({4, 6}, rng, -1, 1, false);
  auto b = random_tensor({6, 3}, rng, -1, 1, false);
  auto c = random_tensor({6, 3}, rng, -1, 1, false);
  const double alpha = 1.7, beta = -0.3;
  auto lhs = matmul(a, add(scale(b, alpha), scale(c, beta)));
  auto rhs = add(scale(matmul(a, b), alpha), scale(matmul(a, c), beta));
  for (std::size_t i = 0; i < lhs.numel(); ++i)
    EXPECT_LE(testing::relative_error(lhs[i], rhs[i], 1e-12), 1e-6);
}

TEST(Conv2d, ScalarKernel) {
  TD x = TD::ones({1, 1, 3, 3});
  TD w({1, 1, 1, 1}, {2});
  EXPECT_EQ(conv2d(x, w, 1, 0).values(), std::vector<double>(9, 2.0));
}

TEST(Conv2d, HandArithmetic) {
  TD x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  TD w = TD::ones({1, 1, 2, 2});
  auto y = conv2d(x, w, 1, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y.values(), (std::vector<double>{12, 16, 24, 28}));
}

TEST(Conv2d, RejectsNonIntegralOutput) {
  TD x = TD::ones({1, 1, 4, 4});
  TD w = TD::ones({1, 1, 3, 3});
  EXPECT_THROW(conv2d(x, w, 2, 0), ShapeError);
  EXPECT_THROW(conv2d(x, TD::ones({1, 1, 7, 7}), 1, 1), ShapeError);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  auto x = random_tensor({2, 3, 8, 8}, rng);
  auto w = random_tensor({4, 3, 3, 3}, rng);
  auto probe = random_tensor({2, 4, 8, 8}, rng, -1, 1, false);
  LossFn f = [&](const std::vector<TD>& in) { return sum(mul(conv2d(in[0], in[1], 1, 1), probe)); };
  EXPECT_LE(max_gradient_error(f, {x, w}), 1e-4);
}

TEST(Backward, SumAndSquare) {
  std::mt19937_64 rng(1);
  auto x = random_tensor({3, 4}, rng);
  backward(sum(x));
  EXPECT_EQ(x.grad().values(), std::vector<double>(12, 1.0));
  x.zero_grad();
  backward(sum(mul(x, x)));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2 * x[i]);
}

TEST(Backward, AccumulatesUntilZeroed) {
  TD x({2}, {1.0, -2.0}, true);
  backward(sum(x));
  backward(sum(x));
  EXPECT_EQ(x.grad().values(), (std::vector<double>{2, 2}));
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, NonScalarLossIsContractError) {
  TD x({2}, {1.0, 2.0}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
}

TEST(Backward, TwoLayerTanhMlp) {
  std::mt19937_64 rng(21);
  auto input = random_tensor({4, 5}, rng, -1, 1, false);
  auto w1 = random_tensor({5, 6}, rng);
  auto b1 = random_tensor({6}, rng);
  auto w2 = random_tensor({6, 2}, rng);
  auto b2 = random_tensor({2}, rng);
  LossFn f = [&](const std::vector<TD>& p) {
    auto h = tanh(add_row_bias(matmul(input, p[0]), p[1]));
    return sum(square(add_row_bias(matmul(h, p[2]), p[3])));
  };
  EXPECT_LE(max_gradient_error(f, {w1, b1, w2, b2}), 1e-4);
}

// Every differentiable op, ten random small instances each.
TEST(GradientCheck, EveryOpTenInstances) {
  const auto cases = testing::gradient_cases();
  std::mt19937_64 rng(2024);
  for (const auto& [name, build] : cases) {
    for (int trial = 0; trial < 10; ++trial) {
      auto [f, inputs] = build(rng);
      EXPECT_LE(max_gradient_error(f, inputs), 1e-4) << name << " trial " << trial;
    }
  }
}

TEST(DoubleBackward, GradientNormPenaltyMatchesFiniteDifferences) {
  // penalty(w) = (|d/dx sum(tanh(x w))| - 1)^2, differentiated w.r.t. w.
  std::mt19937_64 rng(77);
  auto x0 = random_tensor({3, 4}, rng, -1, 1, false);
  auto w = random_tensor({4, 2}, rng);
  LossFn f = [&](const std::vector<TD>& in) {
    const bool outer = grad_enabled();
    EnableGradGuard record;
    TD x = x0.clone();
    x.set_requires_grad(true);
    auto out = sum(tanh(matmul(x, in[0])));
    auto gx = gradients(out, {x}, outer)[0];
    auto norms = sqrt(add_scalar(row_sums(square(gx)), 1e-12));
    return mean(square(add_scalar(norms, -1.0)));
  };
  EXPECT_LE(max_gradient_error(f, {w}), 1e-4);
}

TEST(DoubleBackward, ConvolutionPenaltyMatchesFiniteDifferences) {
  std::mt19937_64 rng(78);
  auto x0 = random_tensor({2, 2, 4, 4}, rng, -1, 1, false);
  auto w = random_tensor({3, 2, 3, 3}, rng);
  LossFn f = [&](const std::vector<TD>& in) {
    const bool outer = grad_enabled();
    EnableGradGuard record;
    TD x = x0.clone();
    x.set_requires_grad(true);
    auto out = sum(leaky_relu(avg_pool2x(conv2d(upsample2x(x), in[0], 1, 1)), 0.2));
    out = add(out, sum(square(conv2d(x, in[0], 1, 1))));
    auto gx = gradients(out, {x}, outer)[0];
    return sum(square(gx));
  };
  EXPECT_LE(max_gradient_error(f, {w}), 1e-4);
}

TEST(Tape, TopologicalOrderAndSingleVisit) {
  std::mt19937_64 rng(4);
  auto a = random_tensor({2, 2}, rng);
  auto b = random_tensor({2, 2}, rng);
  auto shared = mul(a, b);
  auto loss = sum(add(tanh(shared), square(shared)));
  Tape<double> tape(loss);
  std::unordered_set<const detail::Node<double>*> seen;
  for (const auto* node : tape.order()) {
    for (const auto& in : node->inputs)
      if (in->requires_grad) EXPECT_TRUE(seen.count(in.get())) << node->op;
    EXPECT_TRUE(seen.insert(node).second);
  }
  std::size_t visits = 0;
  tape.run(TD::ones({}), {}, false, true, &visits);
  // mul, tanh, square, add, sum
  EXPECT_EQ(visits, 5u);
  EXPECT_EQ(tape.size(), 7u);
}

TEST(Determinism, IdenticalSeedsGiveBitIdenticalResults) {
  auto run = [] {
    std::mt19937_64 rng(99);
    auto x = random_tensor({2, 3, 6, 6}, rng);
    auto w = random_tensor({4, 3, 3, 3}, rng);
    auto loss = sum(tanh(conv2d(x, w, 1, 1)));
    backward(loss);
    return std::tuple{loss.item(), x.grad().values(), w.grad().values()};
  };
  EXPECT_EQ(run(), run());
}

TEST(NoGrad, DisablesRecording) {
  TD x({2}, {1, 2}, true);
  NoGradGuard guard;
  auto y = square(x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(y.is_leaf());
}

}  // namespace
}  // namespace rpgan::ad
