// SPDX-License-Identifier: Apache-2.0
#include "rpgan/io/idx.hpp"

#include <string>

#include "rpgan/io/errors.hpp"

namespace rpgan::io {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
         std::uint32_t{p[3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw TruncatedError("IDX header needs 4 bytes, file has " + std::to_string(bytes.size()));
  }
  if (bytes[0] != 0 || bytes[1] != 0 || bytes[2] != kUnsignedByte || bytes[3] == 0) {
    throw BadMagicError("IDX magic must be 00 00 08 <ndim>, found " + hex_bytes(bytes.first(4)));
  }
  const std::size_t ndim = bytes[3];
  const std::size_t header = 4 + 4 * ndim;
  if (bytes.size() < header) {
    throw TruncatedError("IDX header declares " + std::to_string(ndim) + " dimensions (" +
                         std::to_string(header) + " bytes), file has " +
                         std::to_string(bytes.size()));
  }
  IdxArray out;
  std::uint64_t count = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    out.dims.push_back(read_be32(bytes.data() + 4 + 4 * d));
    count *= out.dims.back();
  }
  const std::uint64_t expected = header + count;
  if (bytes.size() < expected) {
    throw TruncatedError("IDX payload needs " + std::to_string(expected) + " bytes, file has " +
                         std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw FormatError("IDX file has " + std::to_string(bytes.size() - expected) +
                      " trailing bytes");
  }
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

std::vector<std::uint8_t> encode_idx(const IdxArray& array) {
  if (array.dims.empty() || array.dims.size() > 255) {
    throw std::invalid_argument("IDX arrays need 1..255 dimensions");
  }
  std::uint64_t count = 1;
  for (auto d : array.dims) count *= d;
  if (count != array.data.size()) {
    throw std::invalid_argument("IDX dims hold " + std::to_string(count) + " elements, data has " +
                                std::to_string(array.data.size()));
  }
  std::vector<std::uint8_t> out{0, 0, kUnsignedByte, static_cast<std::uint8_t>(array.dims.size())};
  for (auto d : array.dims) append_be32(out, d);
  out.insert(out.end(), array.data.begin(), array.data.end());
  return out;
}

IdxArray read_idx(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  try {
    return parse_idx(bytes);
  } catch (const BadMagicError& e) {
    throw BadMagicError(path.string() + ": " + e.what());
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_idx(const std::filesystem::path& path, const IdxArray& array) {
  write_file_atomic(path, encode_idx(array));
}

Dataset idx_to_dataset(const IdxArray& images, const IdxArray* labels) {
  if (images.dims.size() != 3) {
    throw BadMagicError("IDX image file must be 00 00 08 03, found " +
                        std::to_string(images.dims.size()) + " dimensions");
  }
  const std::size_t n = images.dims[0];
  if (n == 0) throw FormatError("IDX image file holds no images");
  Dataset ds{{1, images.dims[1], images.dims[2]}, {}, {}};
  ds.values.reserve(images.data.size());
  for (auto p : images.data) ds.values.push_back(static_cast<float>(p / 127.5 - 1.0));
  if (labels) {
    if (labels->dims.size() != 1) {
      throw BadMagicError("IDX label file must be 00 00 08 01, found " +
                          std::to_string(labels->dims.size()) + " dimensions");
    }
    if (labels->dims[0] != n) {
      throw FormatError("IDX label count " + std::to_string(labels->dims[0]) +
                        " does not match image count " + std::to_string(n));
    }
    ds.labels.assign(labels->data.begin(), labels->data.end());
  }
  return ds;
}

Dataset load_idx(const std::filesystem::path& images,
                 const std::optional<std::filesystem::path>& labels) {
  const IdxArray img = read_idx(images);
  if (!labels) return idx_to_dataset(img);
  const IdxArray lab = read_idx(*labels);
  return idx_to_dataset(img, &lab);
}

}  // namespace rpgan::io
