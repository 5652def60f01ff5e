// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

/// Dense compute kernels. Every kernel exists twice: a plain loop nest in
/// `serial` kept as the reference, and an OpenMP version in `parallel` used
/// by the tensor engine. Both accumulate every output element in the same
/// order, so their results are bit-identical for any thread count.
namespace rpgan::kernels {

struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t filters = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

namespace serial {

// c[m x n] = a[m x k] * b[k x n]
template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
          std::size_t k, std::size_t n);

// y = x (*) w, cross-correlation, NCHW / FCkk
template <typename T>
void conv2d(std::span<const T> x, std::span<const T> w, std::span<T> y, const ConvGeometry& g);

// gx = adjoint of conv2d w.r.t. x applied to gy
template <typename T>
void conv2d_input_grad(std::span<const T> gy, std::span<const T> w, std::span<T> gx,
                       const ConvGeometry& g);

// gw = adjoint of conv2d w.r.t. w applied to gy
template <typename T>
void conv2d_weight_grad(std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                        const ConvGeometry& g);

}  // namespace serial

namespace parallel {

template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
          std::size_t k, std::size_t n);

template <typename T>
void conv2d(std::span<const T> x, std::span<const T> w, std::span<T> y, const ConvGeometry& g);

template <typename T>
void conv2d_input_grad(std::span<const T> gy, std::span<const T> w, std::span<T> gx,
                       const ConvGeometry& g);

template <typename T>
void conv2d_weight_grad(std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                        const ConvGeometry& g);

}  // namespace parallel

/// Caps the worker count used by `parallel` kernels (0 restores the default).
void set_max_threads(int threads);
int max_threads();
/// The cap set by set_max_threads (0 when none).
int thread_cap();

/// Applies RPGAN_THREADS from the environment, if set, to the kernels and
/// to the OpenMP default used by other parallel loops.
void configure_threads_from_env();

}  // namespace rpgan::kernels
