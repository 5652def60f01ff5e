// SPDX-License-Identifier: Apache-2.0
#pragma once

// RPGN checkpoint container, all integers little-endian:
//   "RPGN"  u32 version  u64 seed
//   u32 meta length, meta text ("key=value\n" lines, sorted by key)
//   u32 bucket count, then per bucket: u32 instance count, u32 kind tag
//   tensor section: u32 count, then per tensor:
//     u32 name length, name, u32 rank, rank x u64 dims, numel x f32
//   optimizer section: same tensor encoding, then
//     u32 counter count, per counter: u32 name length, name, u64 value

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rpgan/core/generator.hpp"

namespace rpgan::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct BucketHeader {
  std::uint32_t instances = 0;
  std::uint32_t kind = 0;

  friend bool operator==(const BucketHeader&, const BucketHeader&) = default;
};

struct Checkpoint {
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;
  std::vector<BucketHeader> buckets;
  std::vector<NamedTensor> tensors;
  std::vector<NamedTensor> optimizer;
  std::map<std::string, std::uint64_t> counters;

  const NamedTensor* find(const std::string& name) const;
  const NamedTensor& tensor(const std::string& name) const;
  const std::string& meta_value(const std::string& key) const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws BadMagicError, BadVersionError, TruncatedError or FormatError.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

NamedTensor to_named(const std::string& name, const Tensor<float>& t);
Tensor<float> from_named(const NamedTensor& t, bool requires_grad = true);

/// "kind=fc act=relu in=8 out=16 shape=4x4x4 bias=1" and similar.
std::string encode_layer(const LayerSpec& spec);
LayerSpec decode_layer(const std::string& text);

/// Stores architecture, trainability flags and every parameter under
/// `prefix` (e.g. "gen."). The bucket headers are replaced.
void put_generator(Checkpoint& ckpt, const Generator<float>& gen,
                   const std::string& prefix = "gen.");
Generator<float> get_generator(const Checkpoint& ckpt, const std::string& prefix = "gen.");

}  // namespace rpgan::io
