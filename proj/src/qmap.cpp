#include "lowbit/qmap.hpp"

#include <algorithm>
#include <cmath>

#include "lowbit/errors.hpp"

namespace lowbit {
namespace {

void check_bits(int bits) {
  if (bits < 1 || bits > 8) throw RangeError("map bitwidth must be in [1, 8], got " + std::to_string(bits));
}

// All values of the unsigned dynamic exponent code, including 0, sorted.
std::vector<double> unsigned_de_values(int bits) {
  std::vector<double> values;
  if (bits == 0) return {1.0};
  const unsigned count = 1u << bits;
  values.reserve(count);
  for (unsigned pattern = 0; pattern < count; ++pattern) {
    if (pattern == 0) {
      values.push_back(0.0);
      continue;
    }
    if (pattern == 1) {
      values.push_back(1.0);
      continue;
    }
    int leading_zeros = 0;
    while (!(pattern & (1u << (bits - 1 - leading_zeros)))) ++leading_zeros;
    const int fraction_bits = bits - 1 - leading_zeros;
    const unsigned k = pattern & ((1u << fraction_bits) - 1u);
    const double steps = static_cast<double>(1u << fraction_bits);
    // Midpoint of [p_k, p_{k+1}] with p_j = 0.1 + 0.9 j / 2^F.
    const double fraction = 0.1 + 0.9 * (static_cast<double>(k) + 0.5) / steps;
    values.push_back(std::pow(10.0, -leading_zeros) * fraction);
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

std::vector<double> mirror(const std::vector<double>& magnitudes, bool include_zero) {
  std::vector<double> values;
  for (auto it = magnitudes.rbegin(); it != magnitudes.rend(); ++it) {
    if (*it > 0.0) values.push_back(-*it);
  }
  if (include_zero) values.push_back(0.0);
  for (double m : magnitudes) {
    if (m > 0.0) values.push_back(m);
  }
  return values;
}

std::vector<double> unsigned_linear_values(int bits) {
  const std::size_t count = std::size_t{1} << bits;
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = static_cast<double>(i + 1) / static_cast<double>(count);
  return values;
}

}  // namespace

QuantMap::QuantMap(MapKind kind, int bits, bool is_signed, std::vector<double> values)
    : kind_(kind),
      bits_(bits),
      signed_(is_signed),
      includes_zero_(std::find(values.begin(), values.end(), 0.0) != values.end()),
      values_(std::move(values)) {}

QuantMap QuantMap::linear(int bits, bool is_signed) {
  check_bits(bits);
  if (!is_signed) return QuantMap(MapKind::Linear, bits, false, unsigned_linear_values(bits));
  return QuantMap(MapKind::Linear, bits, true, mirror(unsigned_linear_values(bits - 1), false));
}

QuantMap QuantMap::dynamic_exponent(int bits, bool is_signed, bool include_zero) {
  check_bits(bits);
  std::vector<double> values;
  if (is_signed) {
    // One bit goes to the sign; a 1-bit signed map has no room for zero.
    values = mirror(unsigned_de_values(bits - 1), include_zero && bits > 1);
  } else {
    values = unsigned_de_values(bits);
    if (!include_zero) values.erase(values.begin());
  }
  return QuantMap(MapKind::DynamicExponent, bits, is_signed, std::move(values));
}

QuantMap QuantMap::uniform(int bits) {
  check_bits(bits);
  if (bits < 2) throw RangeError("uniform map needs at least 2 bits");
  const int half = (1 << (bits - 1)) - 1;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(2 * half + 1));
  for (int k = -half; k <= half; ++k) values.push_back(static_cast<double>(k) / half);
  return QuantMap(MapKind::Uniform, bits, true, std::move(values));
}

std::uint8_t QuantMap::id() const {
  std::uint8_t base = 0;
  switch (kind_) {
    case MapKind::Linear: base = 0; break;
    case MapKind::DynamicExponent: base = includes_zero_ ? 1 : 2; break;
    case MapKind::Uniform: base = 3; break;
  }
  return static_cast<std::uint8_t>(base | (signed_ ? 0x80 : 0x00));
}

QuantMap QuantMap::from_id(std::uint8_t id, int bits) {
  const bool is_signed = (id & 0x80) != 0;
  switch (id & 0x7F) {
    case 0: return linear(bits, is_signed);
    case 1: return dynamic_exponent(bits, is_signed, true);
    case 2: return dynamic_exponent(bits, is_signed, false);
    case 3:
      if (!is_signed) break;
      return uniform(bits);
    default: break;
  }
  throw RangeError("unknown quantization map id " + std::to_string(id));
}

double QuantMap::max_gap() const {
  double gap = 0.0;
  for (std::size_t i = 1; i < values_.size(); ++i) gap = std::max(gap, values_[i] - values_[i - 1]);
  return gap;
}

std::string QuantMap::name() const {
  switch (kind_) {
    case MapKind::Linear: return "Linear";
    case MapKind::DynamicExponent: return includes_zero_ ? "DE" : "DE-0";
    case MapKind::Uniform: return "Uniform";
  }
  return "?";
}

namespace {

void require_finite(double n) {
  if (!std::isfinite(n)) throw DomainError("cannot encode a non-finite value");
}

}  // namespace

std::uint8_t encode_nearest(const QuantMap& map, double n) {
  require_finite(n);
  const auto values = map.values();
  n = std::clamp(n, values.front(), values.back());
  const auto hi_it = std::lower_bound(values.begin(), values.end(), n);
  const auto hi = static_cast<std::size_t>(hi_it - values.begin());
  if (hi == 0) return 0;
  const std::size_t lo = hi - 1;
  return static_cast<std::uint8_t>(n - values[lo] <= values[hi] - n ? lo : hi);
}

std::uint8_t encode_stochastic(const QuantMap& map, double n, CounterRng& rng) {
  require_finite(n);
  const auto values = map.values();
  n = std::clamp(n, values.front(), values.back());
  const auto hi_it = std::lower_bound(values.begin(), values.end(), n);
  const auto hi = static_cast<std::size_t>(hi_it - values.begin());
  if (values[hi] == n) return static_cast<std::uint8_t>(hi);
  const std::size_t lo = hi - 1;
  const double p_up = (n - values[lo]) / (values[hi] - values[lo]);
  return static_cast<std::uint8_t>(rng.uniform() < p_up ? hi : lo);
}

std::uint8_t encode(const QuantMap& map, double n, Rounding rounding, CounterRng* rng) {
  if (rounding == Rounding::Nearest) return encode_nearest(map, n);
  if (rng == nullptr) throw DomainError("stochastic rounding needs a random stream");
  return encode_stochastic(map, n, *rng);
}

double decode(const QuantMap& map, std::uint8_t code) {
  if (code >= map.size()) {
    throw RangeError("code " + std::to_string(code) + " outside map of " + std::to_string(map.size()) +
                     " values");
  }
  return map[code];
}

}  // namespace lowbit
