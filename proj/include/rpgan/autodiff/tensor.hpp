// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rpgan::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Shape or dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Violated call contract (e.g. backward on a non-scalar).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Whether new ops are recorded for differentiation on this thread.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class EnableGradGuard {
 public:
  EnableGradGuard();
  ~EnableGradGuard();
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node {
  using BackwardFn = std::function<std::vector<Tensor<T>>(const Tensor<T>&)>;

  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // leaf accumulator; empty until the first backward

  const char* op = nullptr;  // null for leaves
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

/// Handle to a dense row-major array that may participate in reverse-mode
/// differentiation. Copies share storage; use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;

  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
      : node_(std::make_shared<detail::Node<T>>()) {
    if (ad::numel(shape) != data.size()) {
      throw ShapeError("tensor data length " + std::to_string(data.size()) +
                       " does not match shape " + to_string(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(const Shape& shape) { return Tensor(shape, std::vector<T>(ad::numel(shape))); }
  static Tensor ones(const Shape& shape) { return full(shape, T(1)); }
  static Tensor full(const Shape& shape, T value) {
    return Tensor(shape, std::vector<T>(ad::numel(shape), value));
  }
  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  /// In-place access for parameter updates; never use on recorded outputs.
  std::span<T> mutable_data() { return node_->data; }
  const std::vector<T>& values() const { return node_->data; }

  T item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
    return node_->data[0];
  }
  T operator[](std::size_t i) const { return node_->data[i]; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  void set_requires_grad(bool flag) {
    if (!is_leaf()) throw ContractError("requires_grad can only be set on leaf tensors");
    node_->requires_grad = flag;
  }
  bool is_leaf() const { return node_->backward == nullptr; }
  const char* op_name() const { return node_->op ? node_->op : "leaf"; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient (zeros if none has been accumulated yet).
  Tensor grad() const {
    if (!has_grad()) return zeros(shape());
    return Tensor(shape(), node_->grad);
  }
  std::span<const T> grad_data() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  Tensor detach() const { return Tensor(shape(), node_->data); }
  Tensor clone() const { return Tensor(shape(), node_->data, node_->requires_grad); }

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }
  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

}  // namespace rpgan::ad
