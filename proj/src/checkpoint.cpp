#include "lowbit/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>
#include <set>

#include "lowbit/errors.hpp"

namespace lowbit {
namespace {

constexpr std::uint8_t kMagic[4] = {'Q', 'S', 'T', '4'};
constexpr std::uint8_t kTagFp32 = 0;
constexpr std::uint8_t kTagPacked = 1;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      bytes_.push_back(static_cast<std::uint8_t>(u & 0xFFu));
      u = static_cast<U>(u >> 8);
    }
  }
  void put_f32(float value) { put(std::bit_cast<std::uint32_t>(value)); }
  void put_bytes(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    require(sizeof(T), what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u = static_cast<decltype(u)>(u | (static_cast<decltype(u)>(bytes_[pos_ + i]) << (8 * i)));
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  float get_f32(const char* what) { return std::bit_cast<float>(get<std::uint32_t>(what)); }

  std::span<const std::uint8_t> get_bytes(std::size_t n, const char* what) {
    require(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void require(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) throw FormatError(std::string("truncated checkpoint reading ") + what, pos_);
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_shape(Writer& w, const Shape& shape) {
  if (shape.size() > 255) throw ShapeError("tensor rank exceeds 255");
  w.put(static_cast<std::uint8_t>(shape.size()));
  for (std::size_t d : shape) w.put(static_cast<std::uint64_t>(d));
}

void write_entry(Writer& w, const TensorF& t) {
  w.put(kTagFp32);
  write_shape(w, t.shape);
  w.put(static_cast<std::uint64_t>(t.size()) * 4);
  for (Eigen::Index i = 0; i < t.size(); ++i) w.put_f32(t.values[i]);
}

void write_entry(Writer& w, const PackedTensor& p) {
  w.put(kTagPacked);
  write_shape(w, p.shape);
  w.put(static_cast<std::uint8_t>(p.bitwidth()));
  w.put(p.spec.map.id());
  const NormScheme& scheme = p.scales.scheme;
  w.put(scheme.id());
  if (scheme.kind == NormScheme::Kind::Block) {
    if (scheme.block_size > 0xFFFFFFFFu) throw ShapeError("block size does not fit in u32");
    w.put(static_cast<std::uint32_t>(scheme.block_size));
  } else if (scheme.kind == NormScheme::Kind::PerAxis) {
    w.put(static_cast<std::uint8_t>(scheme.axis));
  }
  w.put(static_cast<std::uint64_t>(p.scales.scales.size()));
  for (Eigen::Index i = 0; i < p.scales.scales.size(); ++i) w.put_f32(p.scales.scales[i]);
  w.put(static_cast<std::uint64_t>(p.payload.size()));
  w.put_bytes(p.payload);
}

Shape read_shape(Reader& r) {
  const auto ndim = r.get<std::uint8_t>("ndim");
  Shape shape(ndim);
  for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("dimension"));
  return shape;
}

TensorF read_fp32(Reader& r, Shape shape) {
  const std::size_t at = r.position();
  const auto bytes = r.get<std::uint64_t>("payload length");
  const std::size_t count = numel(shape);
  if (bytes != count * 4) {
    throw FormatError("fp32 payload of " + std::to_string(bytes) + " bytes for shape " + shape_string(shape), at);
  }
  Array<float> values(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) values[static_cast<Eigen::Index>(i)] = r.get_f32("fp32 values");
  return TensorF(std::move(shape), std::move(values));
}

PackedTensor read_packed(Reader& r, Shape shape) {
  std::size_t at = r.position();
  const int bits = r.get<std::uint8_t>("bitwidth");
  if (bits < 1 || bits > 8) throw FormatError("bitwidth " + std::to_string(bits) + " out of range", at);
  at = r.position();
  const auto map_id = r.get<std::uint8_t>("map id");
  PackedTensor p;
  try {
    p.spec.map = QuantMap::from_id(map_id, bits);
  } catch (const RangeError& e) {
    throw FormatError(e.what(), at);
  }
  at = r.position();
  const auto scheme_id = r.get<std::uint8_t>("scheme id");
  NormScheme scheme;
  switch (scheme_id) {
    case 0: scheme = NormScheme::per_tensor(); break;
    case 1: scheme = NormScheme::per_axis(r.get<std::uint8_t>("axis")); break;
    case 2: {
      const auto b = r.get<std::uint32_t>("block size");
      if (b == 0) throw FormatError("zero block size", at);
      scheme = NormScheme::block(b);
      break;
    }
    case 3: scheme = NormScheme::rank1(); break;
    case 4: scheme.kind = NormScheme::Kind::Fixed; break;
    default: throw FormatError("unknown scheme id " + std::to_string(scheme_id), at);
  }
  at = r.position();
  std::size_t expected_scales = 0;
  try {
    expected_scales = scale_count(scheme, shape);
  } catch (const ShapeError& e) {
    throw FormatError(e.what(), at);
  }
  const auto scale_count_read = r.get<std::uint64_t>("scale count");
  if (scale_count_read != expected_scales) {
    throw FormatError("scale count " + std::to_string(scale_count_read) + ", expected " +
                          std::to_string(expected_scales),
                      at);
  }
  Eigen::ArrayXf scales(static_cast<Eigen::Index>(expected_scales));
  for (Eigen::Index i = 0; i < scales.size(); ++i) scales[i] = r.get_f32("scales");
  if (scheme.kind == NormScheme::Kind::Fixed) scheme.fixed_scale = scales[0];

  at = r.position();
  const auto payload_bytes = r.get<std::uint64_t>("payload length");
  if (payload_bytes != packed_size(numel(shape), bits)) {
    throw FormatError("packed payload of " + std::to_string(payload_bytes) + " bytes, expected " +
                          std::to_string(packed_size(numel(shape), bits)),
                      at);
  }
  at = r.position();
  const auto payload = r.get_bytes(payload_bytes, "payload");
  p.shape = shape;
  p.payload.assign(payload.begin(), payload.end());
  p.spec.scheme = scheme;
  p.scales = ScaleState{scheme, std::move(shape), std::move(scales)};
  try {
    packed_codes(p);
  } catch (const FormatError& e) {
    throw FormatError(e.what(), at + e.offset());
  }
  return p;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const CheckpointEntry> entries) {
  std::set<std::string> names;
  for (const auto& e : entries) {
    if (!names.insert(e.name).second) throw ConfigError("duplicate checkpoint entry name '" + e.name + "'");
    if (e.name.size() > 0xFFFF) throw ConfigError("checkpoint entry name too long");
  }
  if (entries.size() > 0xFFFFFFFFu) throw ConfigError("too many checkpoint entries");
  Writer w;
  w.put_bytes(kMagic);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.put(static_cast<std::uint16_t>(e.name.size()));
    w.put_bytes({reinterpret_cast<const std::uint8_t*>(e.name.data()), e.name.size()});
    std::visit([&](const auto& value) { write_entry(w, value); }, e.value);
  }
  return w.take();
}

std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.get_bytes(4, "magic");
  if (!std::equal(magic.begin(), magic.end(), std::begin(kMagic))) throw FormatError("bad magic", 0);
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) throw FormatError("unsupported version " + std::to_string(version), 4);
  const auto count = r.get<std::uint32_t>("entry count");
  std::vector<CheckpointEntry> entries;
  std::set<std::string> names;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::size_t entry_at = r.position();
    const auto name_len = r.get<std::uint16_t>("name length");
    const auto name_bytes = r.get_bytes(name_len, "name");
    std::string name(name_bytes.begin(), name_bytes.end());
    if (!names.insert(name).second) throw FormatError("duplicate entry name '" + name + "'", entry_at);
    const std::size_t tag_at = r.position();
    const auto tag = r.get<std::uint8_t>("storage tag");
    Shape shape = read_shape(r);
    if (tag == kTagFp32) {
      entries.push_back({std::move(name), read_fp32(r, std::move(shape))});
    } else if (tag == kTagPacked) {
      entries.push_back({std::move(name), read_packed(r, std::move(shape))});
    } else {
      throw FormatError("unknown storage tag " + std::to_string(tag), tag_at);
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes after last entry", r.position());
  return entries;
}

void save_checkpoint(std::span<const CheckpointEntry> entries, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace lowbit
