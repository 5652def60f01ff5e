// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "rpgan/autodiff/tensor.hpp"

/// Differentiable tensor operations. Every backward rule is itself written
/// in terms of these ops, so gradients can be differentiated again when a
/// graph is requested (needed by the gradient penalty).
namespace rpgan::ad {

// Elementwise, identical shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> neg(const Tensor<T>& x);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T offset);
template <typename T> Tensor<T> square(const Tensor<T>& x);
template <typename T> Tensor<T> sqrt(const Tensor<T>& x);
template <typename T> Tensor<T> reciprocal(const Tensor<T>& x);

// Nonlinearities.
template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);

// Reductions.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
/// [N, ...] -> [...], summing over the leading axis.
template <typename T> Tensor<T> sum_rows(const Tensor<T>& x);
/// [N, ...] -> [N], summing everything but the leading axis.
template <typename T> Tensor<T> row_sums(const Tensor<T>& x);

/// [...] -> [rows, ...]
template <typename T> Tensor<T> broadcast_rows(const Tensor<T>& x, std::size_t rows);
/// [N] -> [N, tail...], repeating each entry across its row.
template <typename T> Tensor<T> expand_rows(const Tensor<T>& x, const Shape& shape);
/// x * s for a one-element tensor s.
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s);

// Linear algebra.
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& a);
/// [N, D] + [D]
template <typename T> Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, const Shape& shape);

// Convolution (NCHW activations, FCkk weights, cross-correlation).
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, std::size_t pad);
template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& gy, const Tensor<T>& w, const Shape& input_shape,
                            std::size_t stride, std::size_t pad);
template <typename T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& x, const Tensor<T>& gy, const Shape& weight_shape,
                             std::size_t stride, std::size_t pad);
/// [N, C, H, W] + [C]
template <typename T> Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias);
/// [N, C, H, W] -> [C]
template <typename T> Tensor<T> sum_channels(const Tensor<T>& x);
template <typename T> Tensor<T> upsample2x(const Tensor<T>& x);
template <typename T> Tensor<T> sum_pool2x(const Tensor<T>& x);
template <typename T> Tensor<T> avg_pool2x(const Tensor<T>& x);

// Row routing along the leading axis.
template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::size_t> rows);
/// Scatter-adds row r of x into output row rows[r]; output has `count` rows.
template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& x, std::span<const std::size_t> rows, std::size_t count);
/// Writes row r of parts[p] into output row index_lists[p][r]. The index lists
/// must partition [0, count).
template <typename T>
Tensor<T> assemble_rows(const std::vector<Tensor<T>>& parts,
                        const std::vector<std::vector<std::size_t>>& index_lists,
                        std::size_t count);

/// Mean softmax cross-entropy of logits [N, C] against integer labels.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels);

}  // namespace rpgan::ad
