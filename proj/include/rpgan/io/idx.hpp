// SPDX-License-Identifier: Apache-2.0
#pragma once

// IDX container (the MNIST distribution format):
//   bytes 0-1  zero
//   byte  2    element type, only 0x08 (unsigned byte) is supported
//   byte  3    number of dimensions d
//   d big-endian u32 dimension sizes
//   prod(dims) raw bytes, last dimension fastest
// Image files are 0x00000803 (N, rows, cols); label files 0x00000801 (N).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rpgan/io/dataset.hpp"

namespace rpgan::io {

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  friend bool operator==(const IdxArray&, const IdxArray&) = default;
};

/// Throws BadMagicError (with the observed header bytes) or TruncatedError.
/// Trailing bytes after the payload are rejected as a FormatError.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx(const IdxArray& array);

IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// Image cube plus optional labels; pixels p become p / 127.5 - 1.
Dataset idx_to_dataset(const IdxArray& images, const IdxArray* labels = nullptr);
Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels = std::nullopt);

}  // namespace rpgan::io
