// SPDX-License-Identifier: Apache-2.0
#include "rpgan/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <sstream>

#include "rpgan/io/errors.hpp"

namespace rpgan::io {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'G', 'N'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::size_t v) {
    if (v > 0xffffffffu) throw std::length_error("checkpoint field exceeds 32 bits");
    uint(static_cast<std::uint32_t>(v));
  }
  void string(const std::string& s) {
    u32(s.size());
    bytes(s.data(), s.size());
  }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) {
      throw TruncatedError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                           std::to_string(pos_) + " (" + std::to_string(n) + " bytes needed, " +
                           std::to_string(b_.size() - pos_) + " left)");
    }
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  U uint(const char* what) {
    auto s = take(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(U{s[i]} << (8 * i));
    return v;
  }
  std::string string(const char* what) {
    const auto n = uint<std::uint32_t>(what);
    auto s = take(n, what);
    return std::string(s.begin(), s.end());
  }
  bool done() const { return pos_ == b_.size(); }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void write_tensors(Writer& w, const std::vector<NamedTensor>& tensors) {
  w.u32(tensors.size());
  for (const auto& t : tensors) {
    if (ad::numel(t.shape) != t.data.size()) {
      throw std::invalid_argument("tensor '" + t.name + "' shape " + ad::to_string(t.shape) +
                                  " does not match " + std::to_string(t.data.size()) + " values");
    }
    w.string(t.name);
    w.u32(t.shape.size());
    for (auto d : t.shape) w.uint(static_cast<std::uint64_t>(d));
    for (float v : t.data) w.f32(v);
  }
}

std::vector<NamedTensor> read_tensors(Reader& r) {
  const auto count = r.uint<std::uint32_t>("tensor count");
  std::vector<NamedTensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.string("tensor name");
    const auto rank = r.uint<std::uint32_t>("tensor rank");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.uint<std::uint64_t>("tensor dims"));
      n *= t.shape.back();
    }
    if (n > r.remaining() / 4) {
      throw TruncatedError("checkpoint truncated in tensor '" + t.name + "': " + std::to_string(n) +
                           " values declared, " + std::to_string(r.remaining()) + " bytes left");
    }
    t.data.resize(n);
    for (auto& v : t.data) v = std::bit_cast<float>(r.uint<std::uint32_t>("tensor data"));
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::size_t to_size(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError("expected an unsigned integer for " + context + ", got '" + s + "'");
  }
}

Shape parse_dims(const std::string& s, const std::string& context) {
  Shape out;
  for (const auto& part : split(s, 'x')) out.push_back(to_size(part, context));
  return out;
}

std::string render_dims(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) out += (i ? "x" : "") + std::to_string(shape[i]);
  return out;
}

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const NamedTensor& Checkpoint::tensor(const std::string& name) const {
  if (auto t = find(name)) return *t;
  throw FormatError("checkpoint has no tensor '" + name + "'");
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw FormatError("checkpoint has no meta key '" + key + "'");
  return it->second;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, 4);
  w.uint(kCheckpointVersion);
  w.uint(ckpt.seed);
  std::string meta;
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw std::invalid_argument("meta entry '" + k + "' contains a reserved character");
    }
    meta += k + "=" + v + "\n";
  }
  w.string(meta);
  w.u32(ckpt.buckets.size());
  for (const auto& b : ckpt.buckets) {
    w.uint(b.instances);
    w.uint(b.kind);
  }
  write_tensors(w, ckpt.tensors);
  write_tensors(w, ckpt.optimizer);
  w.u32(ckpt.counters.size());
  for (const auto& [k, v] : ckpt.counters) {
    w.string(k);
    w.uint(v);
  }
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError("not an RPGN checkpoint, magic bytes are " +
                        hex_bytes(bytes.first(std::min<std::size_t>(4, bytes.size()))));
  }
  r.take(4, "magic");
  const auto version = r.uint<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw BadVersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.seed = r.uint<std::uint64_t>("seed");
  for (const auto& line : split(r.string("meta"), '\n')) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed meta line '" + line + "'");
    ckpt.meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto buckets = r.uint<std::uint32_t>("bucket count");
  for (std::uint32_t i = 0; i < buckets; ++i) {
    BucketHeader b;
    b.instances = r.uint<std::uint32_t>("bucket header");
    b.kind = r.uint<std::uint32_t>("bucket header");
    ckpt.buckets.push_back(b);
  }
  ckpt.tensors = read_tensors(r);
  ckpt.optimizer = read_tensors(r);
  const auto counters = r.uint<std::uint32_t>("counter count");
  for (std::uint32_t i = 0; i < counters; ++i) {
    auto name = r.string("counter name");
    ckpt.counters[name] = r.uint<std::uint64_t>("counter value");
  }
  if (!r.done()) throw FormatError("checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  return decode_checkpoint(bytes);
}

NamedTensor to_named(const std::string& name, const Tensor<float>& t) {
  return NamedTensor{name, t.shape(), t.values()};
}

Tensor<float> from_named(const NamedTensor& t, bool requires_grad) {
  return Tensor<float>(t.shape, t.data, requires_grad);
}

std::string encode_layer(const LayerSpec& spec) {
  std::string out = "kind=" + std::string(to_string(spec.kind)) +
                    " act=" + std::string(to_string(spec.activation));
  if (spec.kind == InstanceKind::FullyConnected) {
    out += " in=" + std::to_string(spec.in_features) + " out=" + std::to_string(spec.out_features);
    if (!spec.out_shape.empty()) out += " shape=" + render_dims(spec.out_shape);
  } else {
    out += " in=" + std::to_string(spec.in_channels) + " out=" + std::to_string(spec.out_channels) +
           " k=" + std::to_string(spec.kernel) + " up=" + (spec.upsample ? "1" : "0");
  }
  out += std::string(" bias=") + (spec.bias ? "1" : "0");
  return out;
}

LayerSpec decode_layer(const std::string& text) {
  std::map<std::string, std::string> fields;
  for (const auto& item : split(text, ' ')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw FormatError("malformed layer field '" + item + "'");
    fields[item.substr(0, eq)] = item.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw FormatError("layer '" + text + "' lacks '" + key + "'");
    return it->second;
  };
  LayerSpec spec;
  try {
    const auto kind = parse_instance_kind(get("kind"));
    const auto act = parse_activation(get("act"));
    const std::size_t in = to_size(get("in"), text), out = to_size(get("out"), text);
    switch (kind) {
      case InstanceKind::FullyConnected:
        spec = LayerSpec::fully_connected(
            in, out, act, fields.count("shape") ? parse_dims(fields["shape"], text) : Shape{});
        break;
      case InstanceKind::Conv:
        spec = LayerSpec::conv(in, out, act, get("up") == "1", to_size(get("k"), text));
        break;
      case InstanceKind::ResidualBlock:
        spec = LayerSpec::residual(in, out, act, get("up") == "1");
        break;
      case InstanceKind::OutputConv:
        spec = LayerSpec::output_conv(in, out, act);
        break;
    }
  } catch (const std::invalid_argument& e) {
    throw FormatError("layer '" + text + "': " + e.what());
  }
  spec.bias = get("bias") == "1";
  return spec;
}

void put_generator(Checkpoint& ckpt, const Generator<float>& gen, const std::string& prefix) {
  const GeneratorArch arch = gen.arch();
  ckpt.meta[prefix + "z_shape"] = render_dims(arch.z_shape);
  ckpt.meta[prefix + "output_activation"] = std::string(to_string(arch.output_activation));
  ckpt.meta[prefix + "z_trainable"] = gen.z_trainable() ? "1" : "0";
  ckpt.meta[prefix + "buckets"] = std::to_string(gen.bucket_count());
  std::string frozen;
  ckpt.buckets.clear();
  for (std::size_t b = 0; b < gen.bucket_count(); ++b) {
    const auto& bucket = gen.bucket(b);
    ckpt.meta[prefix + "layer." + std::to_string(b)] = encode_layer(bucket.spec);
    ckpt.meta[prefix + "instances." + std::to_string(b)] = std::to_string(bucket.size());
    ckpt.buckets.push_back({static_cast<std::uint32_t>(bucket.size()),
                            static_cast<std::uint32_t>(bucket.spec.kind)});
    for (std::size_t i = 0; i < bucket.size(); ++i)
      if (!bucket.instances[i].trainable) {
        frozen += (frozen.empty() ? "" : ",") + std::to_string(b) + "." + std::to_string(i);
      }
  }
  ckpt.meta[prefix + "frozen"] = frozen;
  std::erase_if(ckpt.tensors, [&](const NamedTensor& t) { return t.name.starts_with(prefix); });
  for (const auto& p : gen.parameters()) ckpt.tensors.push_back(to_named(prefix + p.name, p.tensor));
}

Generator<float> get_generator(const Checkpoint& ckpt, const std::string& prefix) {
  const std::size_t n = to_size(ckpt.meta_value(prefix + "buckets"), prefix + "buckets");
  std::vector<Bucket<float>> buckets;
  for (std::size_t b = 0; b < n; ++b) {
    const std::string tag = std::to_string(b);
    Bucket<float> bucket{decode_layer(ckpt.meta_value(prefix + "layer." + tag)), {}};
    const std::size_t m = to_size(ckpt.meta_value(prefix + "instances." + tag), prefix + "instances");
    for (std::size_t i = 0; i < m; ++i) {
      Instance<float> inst;
      inst.spec = bucket.spec;
      for (const auto& [name, shape] : bucket.spec.parameter_shapes()) {
        const auto& t = ckpt.tensor(prefix + "b" + tag + ".i" + std::to_string(i) + "." + name);
        if (t.shape != shape) {
          throw FormatError("tensor '" + t.name + "' has shape " + ad::to_string(t.shape) +
                            ", layer needs " + ad::to_string(shape));
        }
        inst.params.push_back({name, from_named(t)});
      }
      bucket.instances.push_back(std::move(inst));
    }
    buckets.push_back(std::move(bucket));
  }
  for (const auto& item : split(ckpt.meta_value(prefix + "frozen"), ',')) {
    const auto dot = item.find('.');
    if (dot == std::string::npos) throw FormatError("malformed frozen entry '" + item + "'");
    const auto b = to_size(item.substr(0, dot), "frozen"), i = to_size(item.substr(dot + 1), "frozen");
    if (b >= buckets.size() || i >= buckets[b].size()) throw FormatError("frozen entry '" + item + "' out of range");
    buckets[b].instances[i].trainable = false;
  }
  const auto z_shape = parse_dims(ckpt.meta_value(prefix + "z_shape"), prefix + "z_shape");
  const auto& z = ckpt.tensor(prefix + "z");
  if (z.shape != z_shape) throw FormatError("Z tensor shape does not match " + prefix + "z_shape");
  try {
    Generator<float> gen(from_named(z), std::move(buckets),
                         parse_activation(ckpt.meta_value(prefix + "output_activation")));
    gen.set_z_trainable(ckpt.meta_value(prefix + "z_trainable") == "1");
    return gen;
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint generator is inconsistent: ") + e.what());
  }
}

}  // namespace rpgan::io
