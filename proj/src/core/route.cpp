// SPDX-License-Identifier: Apache-2.0
#include "rpgan/core/route.hpp"

#include <sstream>

namespace rpgan {

std::string to_string(const Route& route) {
  std::string out;
  for (std::size_t i = 0; i < route.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(route[i]);
  }
  return out;
}

Route parse_route(const std::string& text) {
  Route route;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, '-')) {
    std::size_t used = 0;
    const auto value = std::stoull(item, &used);
    if (used != item.size()) throw std::invalid_argument("malformed route '" + text + "'");
    route.indices.push_back(static_cast<std::size_t>(value));
  }
  if (route.indices.empty()) throw std::invalid_argument("empty route");
  return route;
}

void validate_route(const Route& route, std::span<const std::size_t> instance_counts) {
  if (route.size() != instance_counts.size()) {
    throw RouteError("route has " + std::to_string(route.size()) + " coordinates, generator has " +
                     std::to_string(instance_counts.size()) + " buckets");
  }
  for (std::size_t b = 0; b < route.size(); ++b) {
    if (route[b] >= instance_counts[b]) {
      throw RouteError("bucket " + std::to_string(b) + ": index " + std::to_string(route[b]) +
                       " out of range [0, " + std::to_string(instance_counts[b]) + ")");
    }
  }
}

Route edit_route(const Route& route, std::size_t bucket, std::size_t new_index,
                 std::span<const std::size_t> instance_counts) {
  if (bucket >= route.size() || bucket >= instance_counts.size()) {
    throw RouteError("bucket " + std::to_string(bucket) + " out of range for a route of length " +
                     std::to_string(route.size()));
  }
  if (new_index >= instance_counts[bucket]) {
    throw RouteError("bucket " + std::to_string(bucket) + ": index " + std::to_string(new_index) +
                     " out of range [0, " + std::to_string(instance_counts[bucket]) + ")");
  }
  Route edited = route;
  edited.indices[bucket] = new_index;
  return edited;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace rpgan
