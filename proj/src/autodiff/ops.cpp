// SPDX-License-Identifier: Apache-2.0
#include "rpgan/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rpgan/kernels.hpp"

namespace rpgan::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
thread_local bool t_grad_enabled = true;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
EnableGradGuard::EnableGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = true; }
EnableGradGuard::~EnableGradGuard() { t_grad_enabled = previous_; }

namespace {

template <typename T>
using BackwardFn = typename detail::Node<T>::BackwardFn;

#ifndef NDEBUG
template <typename T>
void check_finite(const char* op, const std::vector<Tensor<T>>& inputs, const std::vector<T>& out) {
  for (const auto& in : inputs)
    for (T v : in.data())
      if (!std::isfinite(v)) return;
  for (T v : out)
    if (!std::isfinite(v))
      throw ContractError(std::string("non-finite output from ") + op + " on finite inputs");
}
#endif

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      const std::vector<Tensor<T>>& inputs, BackwardFn<T> backward) {
#ifndef NDEBUG
  check_finite(op, inputs, data);
#endif
  Tensor<T> out(std::move(shape), std::move(data));
  if (!grad_enabled()) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.requires_grad(); });
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.op = op;
  node.backward = std::move(backward);
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) node.inputs.push_back(in.node());
  return out;
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

template <typename T, typename F>
std::vector<T> map(const Tensor<T>& x, F f) {
  std::vector<T> out(x.numel());
  auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return out;
}

template <typename T>
Tensor<T> constant_like(const Tensor<T>& x, std::vector<T> values) {
  return Tensor<T>(x.shape(), std::move(values));
}

std::size_t row_size(const Shape& shape) {
  return shape.empty() ? 1 : numel(shape) / shape[0];
}

Shape tail(const Shape& shape) { return Shape(shape.begin() + 1, shape.end()); }

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b},
                        [](const Tensor<T>& gy) { return std::vector<Tensor<T>>{gy, gy}; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b},
                        [](const Tensor<T>& gy) { return std::vector<Tensor<T>>{gy, neg(gy)}; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [a, b](const Tensor<T>& gy) {
    return std::vector<Tensor<T>>{mul(gy, b), mul(gy, a)};
  });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& x) {
  return make_result<T>("neg", x.shape(), map(x, [](T v) { return -v; }), {x},
                        [](const Tensor<T>& gy) { return std::vector<Tensor<T>>{neg(gy)}; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return make_result<T>("scale", x.shape(), map(x, [factor](T v) { return v * factor; }), {x},
                        [factor](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{scale(gy, factor)};
                        });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset) {
  return make_result<T>("add_scalar", x.shape(), map(x, [offset](T v) { return v + offset; }),
                        {x}, [](const Tensor<T>& gy) { return std::vector<Tensor<T>>{gy}; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return make_result<T>("square", x.shape(), map(x, [](T v) { return v * v; }), {x},
                        [x](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{mul(gy, scale(x, T(2)))};
                        });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& x) {
  return make_result<T>("sqrt", x.shape(), map(x, [](T v) { return std::sqrt(v); }), {x},
                        [x](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{
                              mul(gy, scale(reciprocal(sqrt(x)), T(0.5)))};
                        });
}

template <typename T>
Tensor<T> reciprocal(const Tensor<T>& x) {
  return make_result<T>("reciprocal", x.shape(), map(x, [](T v) { return T(1) / v; }), {x},
                        [x](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{neg(mul(gy, square(reciprocal(x))))};
                        });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return make_result<T>("relu", x.shape(), map(x, [](T v) { return v > T(0) ? v : T(0); }), {x},
                        [x](const Tensor<T>& gy) {
                          auto mask = constant_like(x, map(x, [](T v) { return v > T(0) ? T(1) : T(0); }));
                          return std::vector<Tensor<T>>{mul(gy, mask)};
                        });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  return make_result<T>(
      "leaky_relu", x.shape(), map(x, [slope](T v) { return v > T(0) ? v : slope * v; }), {x},
      [x, slope](const Tensor<T>& gy) {
        auto mask = constant_like(x, map(x, [slope](T v) { return v > T(0) ? T(1) : slope; }));
        return std::vector<Tensor<T>>{mul(gy, mask)};
      });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return make_result<T>("tanh", x.shape(), map(x, [](T v) { return std::tanh(v); }), {x},
                        [x](const Tensor<T>& gy) {
                          auto d = add_scalar(neg(square(tanh(x))), T(1));
                          return std::vector<Tensor<T>>{mul(gy, d)};
                        });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  const Shape in_shape = x.shape();
  return make_result<T>("sum", Shape{}, std::vector<T>{acc}, {x},
                        [in_shape](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{
                              mul_scalar(Tensor<T>::ones(in_shape), gy)};
                        });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ContractError("mean of empty tensor");
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  if (x.rank() < 1) throw ShapeError("sum_rows needs rank >= 1, got " + to_string(x.shape()));
  const std::size_t rows = x.dim(0), width = row_size(x.shape());
  std::vector<T> out(width, T(0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j) out[j] += x[r * width + j];
  return make_result<T>("sum_rows", tail(x.shape()), std::move(out), {x},
                        [rows](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{broadcast_rows(gy, rows)};
                        });
}

template <typename T>
Tensor<T> row_sums(const Tensor<T>& x) {
  if (x.rank() < 1) throw ShapeError("row_sums needs rank >= 1, got " + to_string(x.shape()));
  const std::size_t rows = x.dim(0), width = row_size(x.shape());
  std::vector<T> out(rows, T(0));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j) out[r] += x[r * width + j];
  const Shape in_shape = x.shape();
  return make_result<T>("row_sums", Shape{rows}, std::move(out), {x},
                        [in_shape](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{expand_rows(gy, in_shape)};
                        });
}

template <typename T>
Tensor<T> broadcast_rows(const Tensor<T>& x, std::size_t rows) {
  Shape shape{rows};
  shape.insert(shape.end(), x.shape().begin(), x.shape().end());
  std::vector<T> out;
  out.reserve(rows * x.numel());
  for (std::size_t r = 0; r < rows; ++r) out.insert(out.end(), x.data().begin(), x.data().end());
  return make_result<T>("broadcast_rows", std::move(shape), std::move(out), {x},
                        [](const Tensor<T>& gy) { return std::vector<Tensor<T>>{sum_rows(gy)}; });
}

template <typename T>
Tensor<T> expand_rows(const Tensor<T>& x, const Shape& shape) {
  if (x.rank() != 1 || shape.empty() || shape[0] != x.dim(0)) {
    throw ShapeError("expand_rows: cannot expand " + to_string(x.shape()) + " to " +
                     to_string(shape));
  }
  const std::size_t width = row_size(shape);
  std::vector<T> out(numel(shape));
  for (std::size_t r = 0; r < shape[0]; ++r)
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(r * width), width, x[r]);
  return make_result<T>("expand_rows", shape, std::move(out), {x},
                        [](const Tensor<T>& gy) { return std::vector<Tensor<T>>{row_sums(gy)}; });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, const Tensor<T>& s) {
  if (s.numel() != 1) throw ShapeError("mul_scalar: factor has shape " + to_string(s.shape()));
  const T f = s[0];
  return make_result<T>("mul_scalar", x.shape(), map(x, [f](T v) { return v * f; }), {x, s},
                        [x, s](const Tensor<T>& gy) {
                          auto gs = reshape(sum(mul(gy, x)), s.shape());
                          return std::vector<Tensor<T>>{mul_scalar(gy, s), gs};
                        });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  kernels::parallel::gemm<T>(a.data(), b.data(), out, m, k, n);
  return make_result<T>("matmul", Shape{m, n}, std::move(out), {a, b},
                        [a, b](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{matmul(gy, transpose(b)),
                                                        matmul(transpose(a), gy)};
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose expects a matrix, got " + to_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return make_result<T>("transpose", Shape{n, m}, std::move(out), {a},
                        [](const Tensor<T>& gy) { return std::vector<Tensor<T>>{transpose(gy)}; });
}

template <typename T>
Tensor<T> add_row_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw ShapeError("add_row_bias: incompatible shapes " + to_string(x.shape()) + " and " +
                     to_string(bias.shape()));
  }
  const std::size_t rows = x.dim(0), width = x.dim(1);
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < width; ++j) out[r * width + j] = x[r * width + j] + bias[j];
  return make_result<T>("add_row_bias", x.shape(), std::move(out), {x, bias},
                        [](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{gy, sum_rows(gy)};
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& shape) {
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  const Shape in_shape = x.shape();
  return make_result<T>("reshape", shape, x.values(), {x}, [in_shape](const Tensor<T>& gy) {
    return std::vector<Tensor<T>>{reshape(gy, in_shape)};
  });
}

namespace {

kernels::ConvGeometry conv_geometry(const Shape& x, const Shape& w, std::size_t stride,
                                    std::size_t pad) {
  if (x.size() != 4 || w.size() != 4 || x[1] != w[1] || w[2] != w[3]) {
    throw ShapeError("conv2d: incompatible input " + to_string(x) + " and weight " +
                     to_string(w));
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be >= 1");
  kernels::ConvGeometry g{x[0], x[1], x[2], x[3], w[0], w[2], stride, pad};
  if (g.kernel > g.height + 2 * pad || g.kernel > g.width + 2 * pad) {
    throw ShapeError("conv2d: kernel " + std::to_string(g.kernel) + " exceeds padded input " +
                     to_string(x));
  }
  if ((g.height + 2 * pad - g.kernel) % stride != 0 ||
      (g.width + 2 * pad - g.kernel) % stride != 0) {
    throw ShapeError("conv2d: non-integral output size for input " + to_string(x) +
                     " with kernel " + std::to_string(g.kernel) + ", stride " +
                     std::to_string(stride) + ", pad " + std::to_string(pad));
  }
  return g;
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride, std::size_t pad) {
  const auto g = conv_geometry(x.shape(), w.shape(), stride, pad);
  Shape out_shape{g.batch, g.filters, g.out_height(), g.out_width()};
  std::vector<T> out(numel(out_shape));
  kernels::parallel::conv2d<T>(x.data(), w.data(), out, g);
  return make_result<T>("conv2d", std::move(out_shape), std::move(out), {x, w},
                        [x, w, stride, pad](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{
                              conv2d_input_grad(gy, w, x.shape(), stride, pad),
                              conv2d_weight_grad(x, gy, w.shape(), stride, pad)};
                        });
}

template <typename T>
Tensor<T> conv2d_input_grad(const Tensor<T>& gy, const Tensor<T>& w, const Shape& input_shape,
                            std::size_t stride, std::size_t pad) {
  const auto g = conv_geometry(input_shape, w.shape(), stride, pad);
  const Shape expect{g.batch, g.filters, g.out_height(), g.out_width()};
  require_same_shape("conv2d_input_grad", gy.shape(), expect);
  std::vector<T> out(numel(input_shape));
  kernels::parallel::conv2d_input_grad<T>(gy.data(), w.data(), out, g);
  return make_result<T>("conv2d_input_grad", input_shape, std::move(out), {gy, w},
                        [gy, w, stride, pad](const Tensor<T>& ggx) {
                          return std::vector<Tensor<T>>{
                              conv2d(ggx, w, stride, pad),
                              conv2d_weight_grad(ggx, gy, w.shape(), stride, pad)};
                        });
}

template <typename T>
Tensor<T> conv2d_weight_grad(const Tensor<T>& x, const Tensor<T>& gy, const Shape& weight_shape,
                             std::size_t stride, std::size_t pad) {
  const auto g = conv_geometry(x.shape(), weight_shape, stride, pad);
  const Shape expect{g.batch, g.filters, g.out_height(), g.out_width()};
  require_same_shape("conv2d_weight_grad", gy.shape(), expect);
  std::vector<T> out(numel(weight_shape));
  kernels::parallel::conv2d_weight_grad<T>(x.data(), gy.data(), out, g);
  return make_result<T>("conv2d_weight_grad", weight_shape, std::move(out), {x, gy},
                        [x, gy, stride, pad](const Tensor<T>& ggw) {
                          return std::vector<Tensor<T>>{
                              conv2d_input_grad(gy, ggw, x.shape(), stride, pad),
                              conv2d(x, ggw, stride, pad)};
                        });
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() != 4 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw ShapeError("add_channel_bias: incompatible shapes " + to_string(x.shape()) + " and " +
                     to_string(bias.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<T> out(x.numel());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t idx = (b * c + ch) * hw + i;
        out[idx] = x[idx] + bias[ch];
      }
  return make_result<T>("add_channel_bias", x.shape(), std::move(out), {x, bias},
                        [](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{gy, sum_channels(gy)};
                        });
}

template <typename T>
Tensor<T> sum_channels(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("sum_channels expects NCHW, got " + to_string(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  std::vector<T> out(c, T(0));
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < hw; ++i) out[ch] += x[(b * c + ch) * hw + i];
  const Shape in_shape = x.shape();
  return make_result<T>("sum_channels", Shape{c}, std::move(out), {x},
                        [in_shape](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{
                              add_channel_bias(Tensor<T>::zeros(in_shape), gy)};
                        });
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("upsample2x expects NCHW, got " + to_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<T> out(planes * 4 * h * w);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < 2 * h; ++i)
      for (std::size_t j = 0; j < 2 * w; ++j)
        out[(p * 2 * h + i) * 2 * w + j] = x[(p * h + i / 2) * w + j / 2];
  return make_result<T>("upsample2x", Shape{x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out),
                        {x}, [](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{sum_pool2x(gy)};
                        });
}

template <typename T>
Tensor<T> sum_pool2x(const Tensor<T>& x) {
  if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw ShapeError("sum_pool2x expects NCHW with even spatial dims, got " +
                     to_string(x.shape()));
  }
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2) / 2, w = x.dim(3) / 2;
  std::vector<T> out(planes * h * w, T(0));
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < 2 * h; ++i)
      for (std::size_t j = 0; j < 2 * w; ++j)
        out[(p * h + i / 2) * w + j / 2] += x[(p * 2 * h + i) * 2 * w + j];
  return make_result<T>("sum_pool2x", Shape{x.dim(0), x.dim(1), h, w}, std::move(out), {x},
                        [](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{upsample2x(gy)};
                        });
}

template <typename T>
Tensor<T> avg_pool2x(const Tensor<T>& x) {
  return scale(sum_pool2x(x), T(0.25));
}

template <typename T>
Tensor<T> select_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  if (x.rank() < 1) throw ShapeError("select_rows needs rank >= 1");
  const std::size_t width = row_size(x.shape()), count = x.dim(0);
  Shape shape = x.shape();
  shape[0] = rows.size();
  std::vector<T> out;
  out.reserve(rows.size() * width);
  for (std::size_t r : rows) {
    if (r >= count) {
      throw ShapeError("select_rows: row " + std::to_string(r) + " out of range for " +
                       to_string(x.shape()));
    }
    auto begin = x.data().begin() + static_cast<std::ptrdiff_t>(r * width);
    out.insert(out.end(), begin, begin + static_cast<std::ptrdiff_t>(width));
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result<T>("select_rows", std::move(shape), std::move(out), {x},
                        [idx, count](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{scatter_rows<T>(gy, idx, count)};
                        });
}

template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& x, std::span<const std::size_t> rows, std::size_t count) {
  if (x.rank() < 1 || x.dim(0) != rows.size()) {
    throw ShapeError("scatter_rows: " + std::to_string(rows.size()) + " indices for " +
                     to_string(x.shape()));
  }
  const std::size_t width = row_size(x.shape());
  Shape shape = x.shape();
  shape[0] = count;
  std::vector<T> out(count * width, T(0));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= count) throw ShapeError("scatter_rows: row index out of range");
    for (std::size_t j = 0; j < width; ++j) out[rows[r] * width + j] += x[r * width + j];
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result<T>("scatter_rows", std::move(shape), std::move(out), {x},
                        [idx](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{select_rows<T>(gy, idx)};
                        });
}

template <typename T>
Tensor<T> assemble_rows(const std::vector<Tensor<T>>& parts,
                        const std::vector<std::vector<std::size_t>>& index_lists,
                        std::size_t count) {
  if (parts.empty() || parts.size() != index_lists.size()) {
    throw ShapeError("assemble_rows: parts and index lists differ in length");
  }
  const Shape row_shape = tail(parts.front().shape());
  const std::size_t width = numel(row_shape);
  std::vector<T> out(count * width);
  std::vector<bool> seen(count, false);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& part = parts[p];
    if (tail(part.shape()) != row_shape || part.dim(0) != index_lists[p].size()) {
      throw ShapeError("assemble_rows: part " + std::to_string(p) + " has shape " +
                       to_string(part.shape()));
    }
    for (std::size_t r = 0; r < index_lists[p].size(); ++r) {
      const std::size_t dst = index_lists[p][r];
      if (dst >= count || seen[dst]) throw ShapeError("assemble_rows: indices must partition rows");
      seen[dst] = true;
      std::copy_n(part.data().begin() + static_cast<std::ptrdiff_t>(r * width), width,
                  out.begin() + static_cast<std::ptrdiff_t>(dst * width));
    }
  }
  if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
    throw ShapeError("assemble_rows: indices must partition rows");
  }
  Shape shape{count};
  shape.insert(shape.end(), row_shape.begin(), row_shape.end());
  return make_result<T>("assemble_rows", std::move(shape), std::move(out), parts,
                        [index_lists](const Tensor<T>& gy) {
                          std::vector<Tensor<T>> grads;
                          grads.reserve(index_lists.size());
                          for (const auto& idx : index_lists)
                            grads.push_back(select_rows<T>(gy, idx));
                          return grads;
                        });
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + to_string(logits.shape()) + " for " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  std::vector<T> dlogits(n * c);
  T loss = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) throw ShapeError("softmax_cross_entropy: label out of range");
    const T* row = logits.data().data() + i * c;
    const T peak = *std::max_element(row, row + c);
    T z = T(0);
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - peak);
    loss += std::log(z) + peak - row[labels[i]];
    for (std::size_t j = 0; j < c; ++j) {
      const T p = std::exp(row[j] - peak) / z;
      dlogits[i * c + j] = (p - (j == labels[i] ? T(1) : T(0))) / static_cast<T>(n);
    }
  }
  // Second-order terms are not needed by any caller; the local Jacobian is held constant.
  Tensor<T> jac(logits.shape(), std::move(dlogits));
  return make_result<T>("softmax_cross_entropy", Shape{}, std::vector<T>{loss / static_cast<T>(n)},
                        {logits}, [jac](const Tensor<T>& gy) {
                          return std::vector<Tensor<T>>{mul_scalar(jac, gy)};
                        });
}

#define RPGAN_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> neg(const Tensor<T>&);                                                   \
  template Tensor<T> scale(const Tensor<T>&, T);                                              \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                         \
  template Tensor<T> square(const Tensor<T>&);                                                \
  template Tensor<T> sqrt(const Tensor<T>&);                                                  \
  template Tensor<T> reciprocal(const Tensor<T>&);                                            \
  template Tensor<T> relu(const Tensor<T>&);                                                  \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                         \
  template Tensor<T> tanh(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&);                                                   \
  template Tensor<T> mean(const Tensor<T>&);                                                  \
  template Tensor<T> sum_rows(const Tensor<T>&);                                              \
  template Tensor<T> row_sums(const Tensor<T>&);                                              \
  template Tensor<T> broadcast_rows(const Tensor<T>&, std::size_t);                           \
  template Tensor<T> expand_rows(const Tensor<T>&, const Shape&);                             \
  template Tensor<T> mul_scalar(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> transpose(const Tensor<T>&);                                             \
  template Tensor<T> add_row_bias(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t);    \
  template Tensor<T> conv2d_input_grad(const Tensor<T>&, const Tensor<T>&, const Shape&,      \
                                       std::size_t, std::size_t);                             \
  template Tensor<T> conv2d_weight_grad(const Tensor<T>&, const Tensor<T>&, const Shape&,     \
                                        std::size_t, std::size_t);                            \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> sum_channels(const Tensor<T>&);                                          \
  template Tensor<T> upsample2x(const Tensor<T>&);                                            \
  template Tensor<T> sum_pool2x(const Tensor<T>&);                                            \
  template Tensor<T> avg_pool2x(const Tensor<T>&);                                            \
  template Tensor<T> select_rows(const Tensor<T>&, std::span<const std::size_t>);             \
  template Tensor<T> scatter_rows(const Tensor<T>&, std::span<const std::size_t>,             \
                                  std::size_t);                                               \
  template Tensor<T> assemble_rows(const std::vector<Tensor<T>>&,                             \
                                   const std::vector<std::vector<std::size_t>>&, std::size_t); \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const std::size_t>);

RPGAN_INSTANTIATE_OPS(float)
RPGAN_INSTANTIATE_OPS(double)

#undef RPGAN_INSTANTIATE_OPS

}  // namespace rpgan::ad
