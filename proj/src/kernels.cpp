// SPDX-License-Identifier: Apache-2.0
#include "rpgan/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rpgan::kernels {

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelThreshold = 1 << 15;
constexpr std::size_t kColumnBlock = 64;
constexpr std::size_t kRowBlock = 4;

int g_max_threads = 0;

int active_threads() {
#ifdef _OPENMP
  return g_max_threads > 0 ? g_max_threads : omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace

void set_max_threads(int threads) { g_max_threads = std::max(threads, 0); }

int max_threads() { return active_threads(); }

int thread_cap() { return g_max_threads; }

void configure_threads_from_env() {
  if (const char* env = std::getenv("RPGAN_THREADS")) {
    try {
      const int n = std::stoi(env);
      set_max_threads(n);
#ifdef _OPENMP
      if (n > 0) omp_set_num_threads(n);
#endif
    } catch (...) {
      // ignored: malformed value keeps the runtime default
    }
  }
}

namespace serial {

template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
          std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = T(0);
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
  }
}

template <typename T>
void conv2d(std::span<const T> x, std::span<const T> w, std::span<T> y, const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t f = 0; f < g.filters; ++f)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          T sum = T(0);
          for (std::size_t c = 0; c < g.in_channels; ++c)
            for (std::size_t ki = 0; ki < g.kernel; ++ki)
              for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const auto r = static_cast<std::ptrdiff_t>(i * g.stride + ki) -
                               static_cast<std::ptrdiff_t>(g.pad);
                const auto s = static_cast<std::ptrdiff_t>(j * g.stride + kj) -
                               static_cast<std::ptrdiff_t>(g.pad);
                if (r < 0 || s < 0 || r >= static_cast<std::ptrdiff_t>(g.height) ||
                    s >= static_cast<std::ptrdiff_t>(g.width))
                  continue;
                sum += x[((b * g.in_channels + c) * g.height + r) * g.width + s] *
                       w[((f * g.in_channels + c) * g.kernel + ki) * g.kernel + kj];
              }
          y[((b * g.filters + f) * oh + i) * ow + j] = sum;
        }
}

template <typename T>
void conv2d_input_grad(std::span<const T> gy, std::span<const T> w, std::span<T> gx,
                       const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  for (std::size_t b = 0; b < g.batch; ++b)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t r = 0; r < g.height; ++r)
        for (std::size_t s = 0; s < g.width; ++s) {
          T sum = T(0);
          for (std::size_t f = 0; f < g.filters; ++f)
            for (std::size_t ki = 0; ki < g.kernel; ++ki)
              for (std::size_t kj = 0; kj < g.kernel; ++kj) {
                const std::size_t ri = r + g.pad, sj = s + g.pad;
                if (ri < ki || sj < kj) continue;
                if ((ri - ki) % g.stride != 0 || (sj - kj) % g.stride != 0) continue;
                const std::size_t i = (ri - ki) / g.stride, j = (sj - kj) / g.stride;
                if (i >= oh || j >= ow) continue;
                sum += gy[((b * g.filters + f) * oh + i) * ow + j] *
                       w[((f * g.in_channels + c) * g.kernel + ki) * g.kernel + kj];
              }
          gx[((b * g.in_channels + c) * g.height + r) * g.width + s] = sum;
        }
}

template <typename T>
void conv2d_weight_grad(std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                        const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  for (std::size_t f = 0; f < g.filters; ++f)
    for (std::size_t c = 0; c < g.in_channels; ++c)
      for (std::size_t ki = 0; ki < g.kernel; ++ki)
        for (std::size_t kj = 0; kj < g.kernel; ++kj) {
          T sum = T(0);
          for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t i = 0; i < oh; ++i)
              for (std::size_t j = 0; j < ow; ++j) {
                const auto r = static_cast<std::ptrdiff_t>(i * g.stride + ki) -
                               static_cast<std::ptrdiff_t>(g.pad);
                const auto s = static_cast<std::ptrdiff_t>(j * g.stride + kj) -
                               static_cast<std::ptrdiff_t>(g.pad);
                if (r < 0 || s < 0 || r >= static_cast<std::ptrdiff_t>(g.height) ||
                    s >= static_cast<std::ptrdiff_t>(g.width))
                  continue;
                sum += gy[((b * g.filters + f) * oh + i) * ow + j] *
                       x[((b * g.in_channels + c) * g.height + r) * g.width + s];
              }
          gw[((f * g.in_channels + c) * g.kernel + ki) * g.kernel + kj] = sum;
        }
}

}  // namespace serial

namespace parallel {

template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
          std::size_t k, std::size_t n) {
  // Tasks walk column blocks outermost so one block of b stays cached while
  // every row block consumes it; four rows share each load of b.
  const std::size_t col_blocks = (n + kColumnBlock - 1) / kColumnBlock;
  const std::size_t row_blocks = (m + kRowBlock - 1) / kRowBlock;
  const auto tasks = static_cast<std::ptrdiff_t>(row_blocks * col_blocks);
  const bool go_parallel = m * k * n >= kParallelThreshold && active_threads() > 1;
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
#pragma omp parallel for schedule(static) if (go_parallel) num_threads(active_threads())
  for (std::ptrdiff_t t = 0; t < tasks; ++t) {
    const std::size_t i0 = (static_cast<std::size_t>(t) % row_blocks) * kRowBlock;
    const std::size_t i1 = std::min(m, i0 + kRowBlock);
    const std::size_t j0 = (static_cast<std::size_t>(t) / row_blocks) * kColumnBlock;
    const std::size_t j1 = std::min(n, j0 + kColumnBlock);
    for (std::size_t i = i0; i < i1; ++i)
      for (std::size_t j = j0; j < j1; ++j) pc[i * n + j] = T(0);
    if (i1 - i0 == kRowBlock) {
      T* c0 = pc + i0 * n;
      T* c1 = c0 + n;
      T* c2 = c1 + n;
      T* c3 = c2 + n;
      for (std::size_t p = 0; p < k; ++p) {
        const T a0 = pa[i0 * k + p], a1 = pa[(i0 + 1) * k + p];
        const T a2 = pa[(i0 + 2) * k + p], a3 = pa[(i0 + 3) * k + p];
        const T* brow = pb + p * n;
        for (std::size_t j = j0; j < j1; ++j) {
          const T bj = brow[j];
          c0[j] += a0 * bj;
          c1[j] += a1 * bj;
          c2[j] += a2 * bj;
          c3[j] += a3 * bj;
        }
      }
    } else {
      for (std::size_t i = i0; i < i1; ++i) {
        T* row = pc + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = pa[i * k + p];
          const T* brow = pb + p * n;
          for (std::size_t j = j0; j < j1; ++j) row[j] += aip * brow[j];
        }
      }
    }
  }
}

template <typename T>
void conv2d(std::span<const T> x, std::span<const T> w, std::span<T> y, const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const auto tasks = static_cast<std::ptrdiff_t>(g.batch * g.filters);
  const std::size_t work = g.batch * g.filters * oh * ow * g.in_channels * g.kernel * g.kernel;
  const bool go_parallel = work >= kParallelThreshold && active_threads() > 1;
#pragma omp parallel for schedule(static) if (go_parallel) num_threads(active_threads())
  for (std::ptrdiff_t t = 0; t < tasks; ++t) {
    const std::size_t b = static_cast<std::size_t>(t) / g.filters;
    const std::size_t f = static_cast<std::size_t>(t) % g.filters;
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        T sum = T(0);
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          const T* xc = x.data() + (b * g.in_channels + c) * g.height * g.width;
          const T* wc = w.data() + (f * g.in_channels + c) * g.kernel * g.kernel;
          for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            const auto r = static_cast<std::ptrdiff_t>(i * g.stride + ki) -
                           static_cast<std::ptrdiff_t>(g.pad);
            if (r < 0 || r >= static_cast<std::ptrdiff_t>(g.height)) continue;
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
              const auto s = static_cast<std::ptrdiff_t>(j * g.stride + kj) -
                             static_cast<std::ptrdiff_t>(g.pad);
              if (s < 0 || s >= static_cast<std::ptrdiff_t>(g.width)) continue;
              sum += xc[r * static_cast<std::ptrdiff_t>(g.width) + s] * wc[ki * g.kernel + kj];
            }
          }
        }
        y[((b * g.filters + f) * oh + i) * ow + j] = sum;
      }
  }
}

template <typename T>
void conv2d_input_grad(std::span<const T> gy, std::span<const T> w, std::span<T> gx,
                       const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const auto tasks = static_cast<std::ptrdiff_t>(g.batch * g.in_channels);
  const std::size_t work = g.batch * g.filters * oh * ow * g.in_channels * g.kernel * g.kernel;
  const bool go_parallel = work >= kParallelThreshold && active_threads() > 1;
#pragma omp parallel for schedule(static) if (go_parallel) num_threads(active_threads())
  for (std::ptrdiff_t t = 0; t < tasks; ++t) {
    const std::size_t b = static_cast<std::size_t>(t) / g.in_channels;
    const std::size_t c = static_cast<std::size_t>(t) % g.in_channels;
    for (std::size_t r = 0; r < g.height; ++r)
      for (std::size_t s = 0; s < g.width; ++s) {
        T sum = T(0);
        const std::size_t ri = r + g.pad, sj = s + g.pad;
        for (std::size_t f = 0; f < g.filters; ++f) {
          const T* gyf = gy.data() + (b * g.filters + f) * oh * ow;
          const T* wf = w.data() + (f * g.in_channels + c) * g.kernel * g.kernel;
          for (std::size_t ki = 0; ki < g.kernel; ++ki) {
            if (ri < ki || (ri - ki) % g.stride != 0) continue;
            const std::size_t i = (ri - ki) / g.stride;
            if (i >= oh) continue;
            for (std::size_t kj = 0; kj < g.kernel; ++kj) {
              if (sj < kj || (sj - kj) % g.stride != 0) continue;
              const std::size_t j = (sj - kj) / g.stride;
              if (j >= ow) continue;
              sum += gyf[i * ow + j] * wf[ki * g.kernel + kj];
            }
          }
        }
        gx[((b * g.in_channels + c) * g.height + r) * g.width + s] = sum;
      }
  }
}

template <typename T>
void conv2d_weight_grad(std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                        const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const auto tasks = static_cast<std::ptrdiff_t>(g.filters * g.in_channels);
  const std::size_t work = g.batch * g.filters * oh * ow * g.in_channels * g.kernel * g.kernel;
  const bool go_parallel = work >= kParallelThreshold && active_threads() > 1;
#pragma omp parallel for schedule(static) if (go_parallel) num_threads(active_threads())
  for (std::ptrdiff_t t = 0; t < tasks; ++t) {
    const std::size_t f = static_cast<std::size_t>(t) / g.in_channels;
    const std::size_t c = static_cast<std::size_t>(t) % g.in_channels;
    for (std::size_t ki = 0; ki < g.kernel; ++ki)
      for (std::size_t kj = 0; kj < g.kernel; ++kj) {
        T sum = T(0);
        for (std::size_t b = 0; b < g.batch; ++b) {
          const T* gyb = gy.data() + (b * g.filters + f) * oh * ow;
          const T* xb = x.data() + (b * g.in_channels + c) * g.height * g.width;
          for (std::size_t i = 0; i < oh; ++i) {
            const auto r = static_cast<std::ptrdiff_t>(i * g.stride + ki) -
                           static_cast<std::ptrdiff_t>(g.pad);
            for (std::size_t j = 0; j < ow; ++j) {
              const auto s = static_cast<std::ptrdiff_t>(j * g.stride + kj) -
                             static_cast<std::ptrdiff_t>(g.pad);
              if (r < 0 || s < 0 || r >= static_cast<std::ptrdiff_t>(g.height) ||
                  s >= static_cast<std::ptrdiff_t>(g.width))
                continue;
              sum += gyb[i * ow + j] * xb[r * static_cast<std::ptrdiff_t>(g.width) + s];
            }
          }
        }
        gw[((f * g.in_channels + c) * g.kernel + ki) * g.kernel + kj] = sum;
      }
  }
}

}  // namespace parallel

#define RPGAN_INSTANTIATE_KERNELS(NS, T)                                                     \
  template void NS::gemm<T>(std::span<const T>, std::span<const T>, std::span<T>,           \
                            std::size_t, std::size_t, std::size_t);                         \
  template void NS::conv2d<T>(std::span<const T>, std::span<const T>, std::span<T>,         \
                              const ConvGeometry&);                                         \
  template void NS::conv2d_input_grad<T>(std::span<const T>, std::span<const T>,            \
                                         std::span<T>, const ConvGeometry&);                \
  template void NS::conv2d_weight_grad<T>(std::span<const T>, std::span<const T>,           \
                                          std::span<T>, const ConvGeometry&);

RPGAN_INSTANTIATE_KERNELS(serial, float)
RPGAN_INSTANTIATE_KERNELS(serial, double)
RPGAN_INSTANTIATE_KERNELS(parallel, float)
RPGAN_INSTANTIATE_KERNELS(parallel, double)

#undef RPGAN_INSTANTIATE_KERNELS

}  // namespace rpgan::kernels
