// SPDX-License-Identifier: Apache-2.0
#pragma once

// One small randomized loss per differentiable op, for finite-difference checks.

#include <functional>
#include <map>
#include <string>

#include "support/gradcheck.hpp"

namespace rpgan::testing {

using GradientCase = std::function<std::pair<LossFn, std::vector<TensorD>>(std::mt19937_64&)>;

inline std::map<std::string, GradientCase> gradient_cases() {
  using namespace rpgan::ad;
  using TD = TensorD;
  std::map<std::string, GradientCase> cases;
  auto unary = [](auto op, double lo = -1.0, double hi = 1.0) {
    return [op, lo, hi](std::mt19937_64& rng) {
      auto x = random_tensor({3, 4}, rng, lo, hi);
      auto probe = random_tensor({3, 4}, rng, -1, 1, false);
      LossFn f = [op, probe](const std::vector<TD>& in) { return sum(mul(op(in[0]), probe)); };
      return std::pair{f, std::vector<TD>{x}};
    };
  };
  cases["add"] = [](auto& rng) {
    LossFn f = [](const auto& in) { return sum(square(add(in[0], in[1]))); };
    return std::pair{f, std::vector<TD>{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}};
  };
  cases["sub"] = [](auto& rng) {
    LossFn f = [](const auto& in) { return sum(square(sub(in[0], in[1]))); };
    return std::pair{f, std::vector<TD>{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}};
  };
  cases["mul"] = [](auto& rng) {
    LossFn f = [](const auto& in) { return sum(mul(in[0], in[1])); };
    return std::pair{f, std::vector<TD>{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)}};
  };
  cases["neg"] = unary([](const TD& x) { return neg(x); });
  cases["scale"] = unary([](const TD& x) { return scale(x, 2.5); });
  cases["add_scalar"] = unary([](const TD& x) { return square(add_scalar(x, 0.5)); });
  cases["square"] = unary([](const TD& x) { return square(x); });
  cases["sqrt"] = unary([](const TD& x) { return sqrt(x); }, 0.2, 2.0);
  cases["reciprocal"] = unary([](const TD& x) { return reciprocal(x); }, 0.3, 2.0);
  cases["relu"] = unary([](const TD& x) { return relu(x); });
  cases["leaky_relu"] = unary([](const TD& x) { return leaky_relu(x, 0.2); });
  cases["tanh"] = unary([](const TD& x) { return tanh(x); });
  cases["mean"] = [](auto& rng) {
    LossFn f = [](const auto& in) { return mean(square(in[0])); };
    return std::pair{f, std::vector<TD>{random_tensor({3, 4}, rng)}};
  };
  cases["sum_rows"] = [](auto& rng) {
    auto probe = random_tensor({4}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(sum_rows(square(in[0])), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({3, 4}, rng)}};
  };
  cases["row_sums"] = [](auto& rng) {
    auto probe = random_tensor({3}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(row_sums(square(in[0])), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({3, 2, 2}, rng)}};
  };
  cases["expand_rows"] = [](auto& rng) {
    auto probe = random_tensor({3, 4}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(expand_rows(in[0], {3, 4}), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({3}, rng)}};
  };
  cases["broadcast_rows"] = [](auto& rng) {
    auto probe = random_tensor({5, 3}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(broadcast_rows(in[0], 5), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({3}, rng)}};
  };
  cases["mul_scalar"] = [](auto& rng) {
    LossFn f = [](const auto& in) { return sum(square(mul_scalar(in[0], in[1]))); };
    return std::pair{f, std::vector<TD>{random_tensor({2, 3}, rng), random_tensor({}, rng)}};
  };
  cases["matmul"] = [](auto& rng) {
    auto probe = random_tensor({3, 2}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(matmul(in[0], in[1]), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)}};
  };
  cases["transpose"] = [](auto& rng) {
    auto probe = random_tensor({4, 3}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(transpose(in[0]), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({3, 4}, rng)}};
  };
  cases["add_row_bias"] = [](auto& rng) {
    LossFn f = [](const auto& in) { return sum(square(add_row_bias(in[0], in[1]))); };
    return std::pair{f, std::vector<TD>{random_tensor({3, 4}, rng), random_tensor({4}, rng)}};
  };
  cases["reshape"] = [](auto& rng) {
    auto probe = random_tensor({2, 6}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(reshape(in[0], {2, 6}), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({3, 4}, rng)}};
  };
  cases["conv2d"] = [](auto& rng) {
    auto probe = random_tensor({2, 3, 3, 3}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(conv2d(in[0], in[1], 2, 1), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({2, 2, 5, 5}, rng),
                                        random_tensor({3, 2, 3, 3}, rng)}};
  };
  cases["add_channel_bias"] = [](auto& rng) {
    LossFn f = [](const auto& in) { return sum(square(add_channel_bias(in[0], in[1]))); };
    return std::pair{f, std::vector<TD>{random_tensor({2, 3, 2, 2}, rng), random_tensor({3}, rng)}};
  };
  cases["upsample2x"] = [](auto& rng) {
    auto probe = random_tensor({1, 2, 4, 6}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(upsample2x(in[0]), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({1, 2, 2, 3}, rng)}};
  };
  cases["avg_pool2x"] = [](auto& rng) {
    auto probe = random_tensor({1, 2, 2, 3}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) { return sum(mul(avg_pool2x(in[0]), probe)); };
    return std::pair{f, std::vector<TD>{random_tensor({1, 2, 4, 6}, rng)}};
  };
  cases["select_scatter_rows"] = [](auto& rng) {
    const std::vector<std::size_t> idx{2, 0, 2};
    auto probe = random_tensor({4, 2}, rng, -1, 1, false);
    LossFn f = [idx, probe](const auto& in) {
      return sum(mul(scatter_rows<double>(square(select_rows<double>(in[0], idx)), idx, 4), probe));
    };
    return std::pair{f, std::vector<TD>{random_tensor({3, 2}, rng)}};
  };
  cases["assemble_rows"] = [](auto& rng) {
    auto probe = random_tensor({3, 2}, rng, -1, 1, false);
    LossFn f = [probe](const auto& in) {
      return sum(mul(assemble_rows<double>({in[0], in[1]}, {{2}, {0, 1}}, 3), probe));
    };
    return std::pair{f, std::vector<TD>{random_tensor({1, 2}, rng), random_tensor({2, 2}, rng)}};
  };
  cases["softmax_cross_entropy"] = [](auto& rng) {
    const std::vector<std::size_t> labels{0, 2, 1};
    LossFn f = [labels](const auto& in) { return softmax_cross_entropy<double>(in[0], labels); };
    return std::pair{f, std::vector<TD>{random_tensor({3, 4}, rng, -2, 2)}};
  };

  return cases;
}

}  // namespace rpgan::testing
