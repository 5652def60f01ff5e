// SPDX-License-Identifier: Apache-2.0
#include "rpgan/autodiff/tape.hpp"

#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "rpgan/autodiff/ops.hpp"

namespace rpgan::ad {

template <typename T>
Tape<T>::Tape(const Tensor<T>& root) : root_(root) {
  if (!root.defined()) throw ContractError("tape root is undefined");
  if (!root.requires_grad()) return;
  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<const Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order_.push_back(node);
    stack.pop_back();
  }
}

template <typename T>
std::vector<Tensor<T>> Tape<T>::run(const Tensor<T>& seed, const std::vector<Tensor<T>>& targets,
                                    bool create_graph, bool accumulate,
                                    std::size_t* visits) const {
  if (seed.shape() != root_.shape()) {
    throw ShapeError("backward seed " + to_string(seed.shape()) + " does not match root " +
                     to_string(root_.shape()));
  }
  std::optional<NoGradGuard> no_grad;
  std::optional<EnableGradGuard> with_grad;
  if (create_graph) {
    with_grad.emplace();
  } else {
    no_grad.emplace();
  }

  std::unordered_map<const Node*, Tensor<T>> grads;
  if (!order_.empty()) grads.emplace(root_.node().get(), seed);

  std::size_t visited = 0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const Node* node = *it;
    auto found = grads.find(node);
    if (found == grads.end()) continue;
    const Tensor<T> gy = found->second;
    if (!node->backward) {
      if (accumulate) {
        auto* leaf = const_cast<Node*>(node);
        if (leaf->grad.empty()) leaf->grad.assign(leaf->data.size(), T(0));
        for (std::size_t i = 0; i < leaf->grad.size(); ++i) leaf->grad[i] += gy[i];
      }
      continue;
    }
    ++visited;
    auto input_grads = node->backward(gy);
    for (std::size_t i = 0; i < node->inputs.size(); ++i) {
      const Node* input = node->inputs[i].get();
      if (!input->requires_grad) continue;
      auto slot = grads.find(input);
      if (slot == grads.end()) {
        grads.emplace(input, input_grads[i]);
      } else {
        slot->second = add(slot->second, input_grads[i]);
      }
    }
  }
  if (visits) *visits = visited;

  std::vector<Tensor<T>> out;
  out.reserve(targets.size());
  for (const auto& target : targets) {
    auto found = grads.find(target.node().get());
    out.push_back(found == grads.end() ? Tensor<T>::zeros(target.shape()) : found->second);
  }
  return out;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward requires a one-element loss, got shape " +
                        to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward on a loss that is not connected to any trainable tensor");
  }
  Tape<T> tape(loss);
  tape.run(Tensor<T>::ones(loss.shape()), {}, false, true);
}

template <typename T>
std::vector<Tensor<T>> gradients(const Tensor<T>& output, const std::vector<Tensor<T>>& inputs,
                                 bool create_graph) {
  if (output.numel() != 1) {
    throw ContractError("gradients requires a one-element output, got shape " +
                        to_string(output.shape()));
  }
  Tape<T> tape(output);
  return tape.run(Tensor<T>::ones(output.shape()), inputs, create_graph, false);
}

template class Tape<float>;
template class Tape<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);
template std::vector<Tensor<float>> gradients<float>(const Tensor<float>&,
                                                     const std::vector<Tensor<float>>&, bool);
template std::vector<Tensor<double>> gradients<double>(const Tensor<double>&,
                                                       const std::vector<Tensor<double>>&, bool);

}  // namespace rpgan::ad
