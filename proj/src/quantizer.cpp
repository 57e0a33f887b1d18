#include "lowbit/quantizer.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "lowbit/errors.hpp"

namespace lowbit {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

template <typename T>
T parse_number(std::string_view text, std::string_view context) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("bad number '" + std::string(text) + "' in quantizer spec '" + std::string(context) + "'");
  }
  return value;
}

}  // namespace

std::string QuantizerSpec::name() const {
  std::string out = scheme.name() + "/" + map.name();
  if (rounding == Rounding::Stochastic) out += "+SR";
  return out;
}

QuantizerSpec parse_quantizer_spec(std::string_view text, bool is_signed, int default_bits) {
  std::string_view rest = text;
  int bits = default_bits;
  if (const auto at = rest.find('@'); at != std::string_view::npos) {
    bits = parse_number<int>(rest.substr(at + 1), text);
    rest = rest.substr(0, at);
  }
  Rounding rounding = Rounding::Nearest;
  if (const auto plus = rest.find('+'); plus != std::string_view::npos) {
    if (lower(rest.substr(plus + 1)) != "sr") throw ConfigError("unknown rounding suffix in '" + std::string(text) + "'");
    rounding = Rounding::Stochastic;
    rest = rest.substr(0, plus);
  }
  const auto slash = rest.find('/');
  if (slash == std::string_view::npos) throw ConfigError("quantizer spec '" + std::string(text) + "' needs Norm/Map");
  const std::string norm = lower(rest.substr(0, slash));
  const std::string map_name = lower(rest.substr(slash + 1));
  if (bits < 1 || bits > 8) throw ConfigError("bitwidth out of range in '" + std::string(text) + "'");

  NormScheme scheme;
  if (norm == "pertensor" || norm == "per-tensor") {
    scheme = NormScheme::per_tensor();
  } else if (norm == "rank-1" || norm == "rank1") {
    scheme = NormScheme::rank1();
  } else if (norm.size() > 1 && norm[0] == 'b') {
    const auto size = parse_number<std::size_t>(std::string_view(norm).substr(1), text);
    if (size == 0) throw ConfigError("block size must be positive in '" + std::string(text) + "'");
    scheme = NormScheme::block(size);
  } else if (norm.rfind("axis", 0) == 0 && norm.size() > 4) {
    scheme = NormScheme::per_axis(parse_number<std::size_t>(std::string_view(norm).substr(4), text));
  } else if (norm.rfind("fixed=", 0) == 0) {
    const auto scale = parse_number<float>(std::string_view(norm).substr(6), text);
    if (!(scale > 0.0f)) throw ConfigError("fixed scale must be positive in '" + std::string(text) + "'");
    scheme = NormScheme::fixed(scale);
  } else {
    throw ConfigError("unknown normalization '" + norm + "' in '" + std::string(text) + "'");
  }

  auto build_map = [&]() -> QuantMap {
    if (map_name == "linear") return QuantMap::linear(bits, is_signed);
    if (map_name == "de") return QuantMap::dynamic_exponent(bits, is_signed, true);
    if (map_name == "de-0" || map_name == "de0") return QuantMap::dynamic_exponent(bits, is_signed, false);
    if (map_name == "uniform") {
      if (!is_signed || bits < 2) throw ConfigError("uniform map is signed and needs >= 2 bits");
      return QuantMap::uniform(bits);
    }
    throw ConfigError("unknown quantization map '" + map_name + "' in '" + std::string(text) + "'");
  };
  return QuantizerSpec{scheme, build_map(), rounding};
}

NormScheme effective_scheme(const NormScheme& scheme, const Shape& shape) {
  if (scheme.kind == NormScheme::Kind::Rank1 && shape.size() < 2) return NormScheme::block(128);
  return scheme;
}

CodeArray packed_codes(const PackedTensor& p) {
  CodeArray codes = unpack(p.payload, p.bitwidth(), numel(p.shape));
  const std::size_t limit = p.spec.map.size();
  for (std::size_t i = 0; i < codes.codes.size(); ++i) {
    if (codes.codes[i] >= limit) {
      throw FormatError("code " + std::to_string(codes.codes[i]) + " outside map of " + std::to_string(limit) +
                            " values",
                        i * static_cast<std::size_t>(p.bitwidth()) / 8);
    }
  }
  return codes;
}

double overhead_bits_per_element(const QuantizerSpec& spec, const Shape& shape) {
  const std::size_t p = numel(shape);
  if (p == 0) throw ShapeError("overhead of an empty tensor is undefined");
  const std::size_t scales = scale_count(effective_scheme(spec.scheme, shape), shape);
  return spec.map.bitwidth() + 32.0 * static_cast<double>(scales) / static_cast<double>(p);
}

}  // namespace lowbit
