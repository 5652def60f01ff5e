// SPDX-License-Identifier: Apache-2.0
#include "rpgan/lifecycle/extend.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace rpgan::lifecycle {

std::string_view to_string(InitMode mode) {
  return mode == InitMode::Random ? "random" : "clone-perturb";
}

InitMode parse_init_mode(std::string_view text) {
  if (text == "random") return InitMode::Random;
  if (text == "clone-perturb") return InitMode::ClonePerturb;
  throw std::invalid_argument("unknown init mode '" + std::string(text) +
                              "' (expected random or clone-perturb)");
}

void ExtensionSpec::validate(std::size_t bucket_count) const {
  if (added.size() != bucket_count) {
    throw std::invalid_argument("extension lists " + std::to_string(added.size()) +
                                " counts for " + std::to_string(bucket_count) + " buckets");
  }
  bool any = false;
  for (auto a : added) any = any || a > 0;
  if (!any) throw std::invalid_argument("extension adds no instances");
  if (!(perturb >= 0.0)) throw std::invalid_argument("perturb must be >= 0");
}

template <typename T>
Generator<T> extend(const Generator<T>& gen, const ExtensionSpec& spec, Rng& rng) {
  spec.validate(gen.bucket_count());
  std::vector<Bucket<T>> buckets;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t b = 0; b < gen.bucket_count(); ++b) {
    Bucket<T> bucket = gen.bucket(b);
    if (spec.freeze_old)
      for (auto& inst : bucket.instances) inst.trainable = false;
    const std::size_t old = bucket.size();
    for (std::size_t k = 0; k < spec.added[b]; ++k) {
      Instance<T> fresh;
      if (spec.init == InitMode::Random) {
        fresh = Instance<T>::create(bucket.spec, rng);
      } else {
        fresh = gen.bucket(b).instances[uniform_index(rng, old)].clone();
        for (auto& p : fresh.params) {
          auto data = p.tensor.mutable_data();
          double sq = 0.0;
          for (T v : data) sq += static_cast<double>(v) * static_cast<double>(v);
          const double sd = spec.perturb * std::sqrt(sq / static_cast<double>(data.size()));
          for (auto& v : data) v = static_cast<T>(v + sd * normal(rng));
        }
      }
      fresh.trainable = true;
      bucket.instances.push_back(std::move(fresh));
    }
    buckets.push_back(std::move(bucket));
  }
  Generator<T> out(gen.z(), std::move(buckets), gen.output_activation());
  out.set_z_trainable(!spec.freeze_z);
  return out;
}

template <typename T>
train::TrainReport incremental_train(Generator<T>& gen, train::Discriminator<T>& disc,
                                     const io::Dataset& data, const train::TrainConfig& cfg) {
  bool any = false;
  for (const auto& p : gen.parameters()) any = any || p.trainable;
  if (!any) throw ad::ContractError("incremental training needs at least one trainable generator parameter");
  return train::train(gen, disc, data, cfg);
}

template <typename T>
std::uint64_t frozen_checksum(const Generator<T>& gen) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&](const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : gen.parameters()) {
    if (p.trainable) continue;
    feed(p.name.data(), p.name.size());
    const auto data = p.tensor.data();
    feed(data.data(), data.size() * sizeof(T));
  }
  return h;
}

template Generator<float> extend(const Generator<float>&, const ExtensionSpec&, Rng&);
template Generator<double> extend(const Generator<double>&, const ExtensionSpec&, Rng&);
template train::TrainReport incremental_train(Generator<float>&, train::Discriminator<float>&,
                                              const io::Dataset&, const train::TrainConfig&);
template train::TrainReport incremental_train(Generator<double>&, train::Discriminator<double>&,
                                              const io::Dataset&, const train::TrainConfig&);
template std::uint64_t frozen_checksum(const Generator<float>&);
template std::uint64_t frozen_checksum(const Generator<double>&);

}  // namespace rpgan::lifecycle
