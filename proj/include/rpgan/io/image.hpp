// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rpgan/autodiff/tensor.hpp"

namespace rpgan::io {

/// [-1, 1] -> {0..255}: floor((x + 1) / 2 * 255), clamped; NaN maps to 0.
std::uint8_t to_byte(double x);

/// Splits [N, ...] into N tensors of shape [...].
template <typename T>
std::vector<ad::Tensor<T>> unbatch(const ad::Tensor<T>& batch);

/// Tiles [C,H,W] images (C = 1 or 3) row-major into a binary PGM (P5) or PPM
/// (P6), with 2-pixel black separators between tiles. The header is
/// "P5 <width> <height> 255\n".
std::vector<std::uint8_t> encode_grid(const std::vector<ad::Tensor<float>>& images,
                                      std::size_t cols);
void write_grid(const std::vector<ad::Tensor<float>>& images, std::size_t cols,
                const std::filesystem::path& path);

}  // namespace rpgan::io
