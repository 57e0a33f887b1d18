#include "lowbit/rng.hpp"

#include <cmath>
#include <numbers>

namespace lowbit {

std::uint64_t mix64(std::uint64_t x) {
  // SplitMix64 finalizer.
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

CounterRng::CounterRng(std::uint64_t seed, std::string_view name, std::uint64_t step)
    : key_(mix64(mix64(seed) ^ mix64(hash_name(name) + 0x632BE59BD9B4E019ULL) ^
                 mix64(step * 0xD1B54A32D192ED03ULL + 1))) {}

CounterRng::result_type CounterRng::operator()() {
  return mix64(key_ ^ mix64(counter_++));
}

double CounterRng::uniform() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(angle);
  has_spare_ = true;
  return r * std::cos(angle);
}

CounterRng CounterRng::fork(std::string_view label) const {
  return CounterRng(mix64(key_ ^ hash_name(label)));
}

}  // namespace lowbit
