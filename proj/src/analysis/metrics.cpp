// SPDX-License-Identifier: Apache-2.0
#include "rpgan/analysis/metrics.hpp"

#include <cmath>

#include "rpgan/autodiff/ops.hpp"
#include "rpgan/io/image.hpp"

namespace rpgan::analysis {

template <typename T>
std::array<double, kColorBins> color_histogram(std::span<const T> channel) {
  if (channel.empty()) throw ad::ContractError("color histogram of an empty channel");
  std::array<double, kColorBins> hist{};
  for (T x : channel) hist[io::to_byte(static_cast<double>(x)) * kColorBins / 256] += 1.0;
  for (auto& h : hist) h /= static_cast<double>(channel.size());
  return hist;
}

double hellinger(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("hellinger: histogram sizes differ");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
    acc += d * d;
  }
  return std::sqrt(acc) / std::sqrt(2.0);
}

template <typename T>
std::vector<double> hellinger_color_distance(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ad::ShapeError("color distance of " + ad::to_string(a.shape()) + " and " + ad::to_string(b.shape()));
  }
  if (a.numel() == 0) throw ad::ContractError("color distance of empty images");
  const std::size_t channels = a.rank() == 3 ? a.dim(0) : 1;
  const std::size_t plane = a.numel() / channels;
  std::vector<double> out;
  for (std::size_t c = 0; c < channels; ++c) {
    auto p = color_histogram<T>(a.data().subspan(c * plane, plane));
    auto q = color_histogram<T>(b.data().subspan(c * plane, plane));
    out.push_back(hellinger(p, q));
  }
  return out;
}

namespace {

template <typename T>
void require_trained(const train::Discriminator<T>* disc) {
  if (disc == nullptr || !disc->trained()) {
    throw MetricUnavailable(
        "the semantic metric needs a trained discriminator; use the pixel metric "
        "(--metric pixel) as the fallback");
  }
}

template <typename T>
std::vector<std::vector<double>> features_of(const std::vector<Tensor<T>>& images,
                                             const train::Discriminator<T>& disc) {
  ad::NoGradGuard no_grad;
  const Shape& shape = images.front().shape();
  std::vector<T> stacked;
  for (const auto& img : images) {
    if (img.shape() != shape) throw ad::ShapeError("semantic metric needs images of one shape");
    stacked.insert(stacked.end(), img.data().begin(), img.data().end());
  }
  Shape batch{images.size()};
  batch.insert(batch.end(), shape.begin(), shape.end());
  auto f = disc.features(Tensor<T>(batch, std::move(stacked)));
  const std::size_t width = f.dim(1);
  std::vector<std::vector<double>> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i)
    out[i].assign(f.data().begin() + i * width, f.data().begin() + (i + 1) * width);
  return out;
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 && bb == 0.0) return 0.0;
  if (aa == 0.0 || bb == 0.0) return 1.0;
  const double cos = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
  return 1.0 - cos;
}

template <typename T>
double rms_distance(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) throw ad::ShapeError("pixel distance needs images of one shape");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.numel()));
}

template <typename T, typename F>
std::vector<std::vector<double>> pairwise(std::size_t n, F&& d) {
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m[i][j] = m[j][i] = d(i, j);
  return m;
}

}  // namespace

template <typename T>
double semantic_distance(const Tensor<T>& a, const Tensor<T>& b, const train::Discriminator<T>* disc) {
  require_trained(disc);
  auto f = features_of<T>({a, b}, *disc);
  return cosine_distance(f[0], f[1]);
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Color: return "color";
    case Metric::Semantic: return "semantic";
    case Metric::Pixel: return "pixel";
  }
  return "?";
}

Metric parse_metric(std::string_view text) {
  for (auto m : {Metric::Color, Metric::Semantic, Metric::Pixel})
    if (to_string(m) == text) return m;
  throw std::invalid_argument("unknown metric '" + std::string(text) + "' (expected color, semantic or pixel)");
}

template <typename T>
PairwiseMetric<T> make_metric(Metric metric, const train::Discriminator<T>* disc) {
  switch (metric) {
    case Metric::Color:
      return [](const std::vector<Tensor<T>>& imgs) {
        return pairwise<T>(imgs.size(), [&](std::size_t i, std::size_t j) {
          auto per_channel = hellinger_color_distance(imgs[i], imgs[j]);
          double sum = 0.0;
          for (double v : per_channel) sum += v;
          return sum / static_cast<double>(per_channel.size());
        });
      };
    case Metric::Semantic:
      require_trained(disc);
      return [disc](const std::vector<Tensor<T>>& imgs) {
        auto f = features_of(imgs, *disc);
        return pairwise<T>(imgs.size(), [&](std::size_t i, std::size_t j) { return cosine_distance(f[i], f[j]); });
      };
    case Metric::Pixel:
      return [](const std::vector<Tensor<T>>& imgs) {
        return pairwise<T>(imgs.size(), [&](std::size_t i, std::size_t j) { return rms_distance(imgs[i], imgs[j]); });
      };
  }
  throw std::invalid_argument("unknown metric");
}

#define RPGAN_INSTANTIATE_METRICS(T)                                                              \
  template std::array<double, kColorBins> color_histogram(std::span<const T>);                     \
  template std::vector<double> hellinger_color_distance(const Tensor<T>&, const Tensor<T>&);      \
  template double semantic_distance(const Tensor<T>&, const Tensor<T>&,                           \
                                    const train::Discriminator<T>*);                              \
  template PairwiseMetric<T> make_metric(Metric, const train::Discriminator<T>*);
RPGAN_INSTANTIATE_METRICS(float)
RPGAN_INSTANTIATE_METRICS(double)

}  // namespace rpgan::analysis
