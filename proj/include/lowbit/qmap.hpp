#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lowbit/rng.hpp"

namespace lowbit {

enum class MapKind : std::uint8_t {
  Linear,
  DynamicExponent,
  // Zero-centred uniform grid {k/B : |k| <= B}, B = 2^(b-1) - 1. This is the
  // symmetric absmax linear quantizer used for parameters, gradient
  // accumulators and momentum in low-precision SGDM.
  Uniform,
};

enum class Rounding : std::uint8_t { Nearest, Stochastic };

// Sorted table of representable normalized values for a bitwidth.
// Immutable once built.
class QuantMap {
 public:
  // Unsigned: {(i+1)/2^b}. Signed: the (b-1)-bit unsigned grid mirrored
  // through zero. Zero is never included.
  static QuantMap linear(int bits, bool is_signed);

  // Dynamic exponent map: E leading zero bits select the decimal exponent,
  // an indicator bit follows, and F fraction bits pick one of 2^F midpoints
  // evenly spread over (0.1, 1). The all-zero pattern is 0 and the pattern
  // 0...01 is 1. Signed maps mirror the (b-1)-bit unsigned magnitudes.
  // With include_zero = false the zero entry is dropped (DE-0).
  static QuantMap dynamic_exponent(int bits, bool is_signed, bool include_zero);

  // Signed zero-centred uniform grid, bits >= 2.
  static QuantMap uniform(int bits);

  // Checkpoint map identifier: 0=Linear, 1=DE, 2=DE-0, 3=Uniform. The high
  // bit (0x80) marks a signed map.
  std::uint8_t id() const;
  static QuantMap from_id(std::uint8_t id, int bits);

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }

  int bitwidth() const { return bits_; }
  bool is_signed() const { return signed_; }
  bool includes_zero() const { return includes_zero_; }
  MapKind kind() const { return kind_; }

  // Largest distance between adjacent values.
  double max_gap() const;

  // "Linear", "DE", "DE-0", "Uniform".
  std::string name() const;

  friend bool operator==(const QuantMap& a, const QuantMap& b) {
    return a.kind_ == b.kind_ && a.bits_ == b.bits_ && a.signed_ == b.signed_ &&
           a.values_ == b.values_;
  }

 private:
  QuantMap(MapKind kind, int bits, bool is_signed, std::vector<double> values);

  MapKind kind_;
  int bits_;
  bool signed_;
  bool includes_zero_;
  std::vector<double> values_;
};

// Index of the map value nearest to n after clamping n into the map range.
// Ties go to the smaller index.
std::uint8_t encode_nearest(const QuantMap& map, double n);

// Rounds n to one of its two bracketing map values with probability
// proportional to proximity, so E[decode(code)] = clamp(n).
std::uint8_t encode_stochastic(const QuantMap& map, double n, CounterRng& rng);

std::uint8_t encode(const QuantMap& map, double n, Rounding rounding, CounterRng* rng);

// Map value for a code; RangeError when code >= map.size().
double decode(const QuantMap& map, std::uint8_t code);

}  // namespace lowbit
