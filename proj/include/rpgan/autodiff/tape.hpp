// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "rpgan/autodiff/tensor.hpp"

namespace rpgan::ad {

/// The recorded operations reachable from a root tensor, in topological
/// order (every op appears after the ops producing its inputs).
template <typename T>
class Tape {
 public:
  using Node = detail::Node<T>;

  explicit Tape(const Tensor<T>& root);

  std::size_t size() const { return order_.size(); }
  const std::vector<const Node*>& order() const { return order_; }

  /// Reverse sweep seeded with `seed` at the root. Returns the gradient for
  /// each of `targets` (zeros where unreachable). With `accumulate`, leaf
  /// gradients are also added into the leaves' grad buffers. `visits`
  /// receives the number of recorded ops whose backward rule ran.
  std::vector<Tensor<T>> run(const Tensor<T>& seed, const std::vector<Tensor<T>>& targets,
                             bool create_graph, bool accumulate,
                             std::size_t* visits = nullptr) const;

 private:
  Tensor<T> root_;
  std::vector<const Node*> order_;
};

/// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
/// a one-element loss.
template <typename T>
void backward(const Tensor<T>& loss);

/// Gradients of a one-element output w.r.t. `inputs` without touching leaf
/// grad buffers. With `create_graph` the results are themselves differentiable.
template <typename T>
std::vector<Tensor<T>> gradients(const Tensor<T>& output, const std::vector<Tensor<T>>& inputs,
                                 bool create_graph = false);

}  // namespace rpgan::ad
