// SPDX-License-Identifier: Apache-2.0
#include "rpgan/io/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rpgan/io/errors.hpp"

namespace rpgan::io {

std::uint8_t to_byte(double x) {
  if (std::isnan(x)) return 0;
  const double v = std::floor((x + 1.0) / 2.0 * 255.0);
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

template <typename T>
std::vector<ad::Tensor<T>> unbatch(const ad::Tensor<T>& batch) {
  if (batch.rank() < 2) throw ad::ShapeError("unbatch needs a batch axis, got " + ad::to_string(batch.shape()));
  const ad::Shape inner(batch.shape().begin() + 1, batch.shape().end());
  const std::size_t width = ad::numel(inner);
  std::vector<ad::Tensor<T>> out;
  auto data = batch.data();
  for (std::size_t i = 0; i < batch.dim(0); ++i)
    out.emplace_back(inner, std::vector<T>(data.begin() + i * width, data.begin() + (i + 1) * width));
  return out;
}

std::vector<std::uint8_t> encode_grid(const std::vector<ad::Tensor<float>>& images,
                                      std::size_t cols) {
  constexpr std::size_t kGap = 2;
  if (images.empty()) throw std::invalid_argument("write_grid needs at least one image");
  if (cols == 0) throw std::invalid_argument("write_grid needs cols >= 1");
  const ad::Shape shape = images.front().shape();
  if (shape.size() != 3 || (shape[0] != 1 && shape[0] != 3)) {
    throw ad::ShapeError("grid images must be [1|3,H,W], got " + ad::to_string(shape));
  }
  for (const auto& img : images)
    if (img.shape() != shape) {
      throw ad::ShapeError("grid images must share one shape: " + ad::to_string(shape) + " vs " +
                           ad::to_string(img.shape()));
    }
  const std::size_t c = shape[0], h = shape[1], w = shape[2];
  cols = std::min(cols, images.size());
  const std::size_t rows = (images.size() + cols - 1) / cols;
  const std::size_t width = cols * w + (cols - 1) * kGap;
  const std::size_t height = rows * h + (rows - 1) * kGap;

  const std::string header = std::string(c == 1 ? "P5 " : "P6 ") + std::to_string(width) + " " +
                             std::to_string(height) + " 255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t offset = out.size();
  out.resize(offset + width * height * c, 0);
  for (std::size_t k = 0; k < images.size(); ++k) {
    const std::size_t y0 = (k / cols) * (h + kGap), x0 = (k % cols) * (w + kGap);
    auto data = images[k].data();
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t ch = 0; ch < c; ++ch) {
          out[offset + ((y0 + y) * width + x0 + x) * c + ch] = to_byte(data[(ch * h + y) * w + x]);
        }
  }
  return out;
}

void write_grid(const std::vector<ad::Tensor<float>>& images, std::size_t cols,
                const std::filesystem::path& path) {
  write_file_atomic(path, encode_grid(images, cols));
}

template std::vector<ad::Tensor<float>> unbatch(const ad::Tensor<float>&);
template std::vector<ad::Tensor<double>> unbatch(const ad::Tensor<double>&);

}  // namespace rpgan::io
