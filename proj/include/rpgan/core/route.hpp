// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rpgan {

using Rng = std::mt19937_64;

/// Invalid route coordinate; the message names the bucket and the index.
class RouteError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// One instance index per bucket, 0-based. This tuple is the latent code.
struct Route {
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
  std::size_t operator[](std::size_t bucket) const { return indices[bucket]; }
  friend bool operator==(const Route&, const Route&) = default;
  friend auto operator<=>(const Route&, const Route&) = default;
};

/// "3-0-7" style rendering used in CSV output.
std::string to_string(const Route& route);
Route parse_route(const std::string& text);

/// Throws RouteError unless route has one valid index per bucket.
void validate_route(const Route& route, std::span<const std::size_t> instance_counts);

/// Copy of `route` with coordinate `bucket` replaced by `new_index`.
Route edit_route(const Route& route, std::size_t bucket, std::size_t new_index,
                 std::span<const std::size_t> instance_counts);

/// Uniform index in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

}  // namespace rpgan
