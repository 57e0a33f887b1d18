#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lowbit/bitpack.hpp"
#include "lowbit/normalize.hpp"
#include "lowbit/qmap.hpp"
#include "lowbit/rng.hpp"
#include "lowbit/tensor.hpp"

namespace lowbit {

// Normalization + mapping + rounding, named "Norm/Map" (e.g. "B128/DE",
// "Rank-1/Linear"), with "+SR" for stochastic rounding.
struct QuantizerSpec {
  NormScheme scheme;
  QuantMap map = QuantMap::dynamic_exponent(4, true, true);
  Rounding rounding = Rounding::Nearest;

  std::string name() const;
};

// Parses "<norm>/<map>[+SR][@bits]". Norm: PerTensor, Axis<k>, B<size>,
// Rank-1 (or Rank1), Fixed=<scale>. Map: Linear, DE, DE-0, Uniform.
// Bits default to `default_bits`. ConfigError on anything unrecognised.
QuantizerSpec parse_quantizer_spec(std::string_view text, bool is_signed, int default_bits = 4);

// Rank-1 reduces to per-tensor on tensors with fewer than two axes; B128 is
// used there instead.
NormScheme effective_scheme(const NormScheme& scheme, const Shape& shape);

// A quantized tensor: packed codes plus the scales needed to invert them.
struct PackedTensor {
  Shape shape;
  std::vector<std::uint8_t> payload;
  ScaleState scales;
  QuantizerSpec spec;

  int bitwidth() const { return spec.map.bitwidth(); }
  // Bytes held in memory: codes plus fp32 scales.
  std::size_t storage_bytes() const {
    return payload.size() + sizeof(float) * static_cast<std::size_t>(scales.scales.size());
  }

  // Rounding mode is not part of the stored representation.
  friend bool operator==(const PackedTensor& a, const PackedTensor& b) {
    return a.shape == b.shape && a.payload == b.payload && a.scales == b.scales &&
           a.spec.map == b.spec.map && a.spec.scheme == b.spec.scheme;
  }
};

template <typename Scalar>
void require_finite(const Tensor<Scalar>& x, const char* what) {
  if (!x.values.isFinite().all()) throw DomainError(std::string(what) + ": tensor contains NaN or Inf");
}

// Scales are recomputed from x on every call. `rng` is required for
// stochastic rounding and ignored otherwise.
template <typename Scalar>
PackedTensor quantize(const Tensor<Scalar>& x, const QuantizerSpec& spec, CounterRng* rng = nullptr) {
  require_finite(x, "quantize");
  if (!spec.map.is_signed() && (x.values < Scalar(0)).any()) {
    throw DomainError("quantize: negative input for unsigned map " + spec.map.name());
  }
  if (spec.rounding == Rounding::Stochastic && rng == nullptr) {
    throw DomainError("quantize: stochastic rounding needs a random stream");
  }
  PackedTensor out;
  out.shape = x.shape;
  out.spec = spec;
  out.spec.scheme = effective_scheme(spec.scheme, x.shape);
  out.scales = compute_scales(x, out.spec.scheme);
  const Tensor<Scalar> n = normalize(x, out.scales);
  std::vector<std::uint8_t> codes(static_cast<std::size_t>(n.size()));
  for (Eigen::Index i = 0; i < n.size(); ++i) {
    codes[static_cast<std::size_t>(i)] = encode(spec.map, static_cast<double>(n.values[i]), spec.rounding, rng);
  }
  out.payload = pack(codes, spec.map.bitwidth());
  return out;
}

// Codes of a packed tensor; FormatError on a payload of the wrong length or
// a code outside the map.
CodeArray packed_codes(const PackedTensor& p);

template <typename Scalar>
Tensor<Scalar> dequantize(const PackedTensor& p) {
  const CodeArray codes = packed_codes(p);
  Array<Scalar> n(static_cast<Eigen::Index>(codes.codes.size()));
  for (std::size_t i = 0; i < codes.codes.size(); ++i) {
    n[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(p.spec.map[codes.codes[i]]);
  }
  return denormalize(Tensor<Scalar>(p.shape, std::move(n)), p.scales);
}

// Bits per element including fp32 scale storage: b + 32 * scales / p.
double overhead_bits_per_element(const QuantizerSpec& spec, const Shape& shape);

}  // namespace lowbit
