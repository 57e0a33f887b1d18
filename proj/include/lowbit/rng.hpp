#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace lowbit {

// Counter-based random stream. Each stream is identified by a 64-bit key and
// the n-th draw is a pure function of (key, n), so streams can be recreated
// from (seed, tensor name, step) and consumed on any thread.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

  // Stream keyed by a seed, a tensor name and a step counter.
  CounterRng(std::uint64_t seed, std::string_view name, std::uint64_t step);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  // Uniform double in [0, 1) with 53 random bits.
  double uniform();

  // Standard normal via Box-Muller; both variates of a pair are used.
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  // Independent child stream, e.g. one per state kind of a tensor.
  CounterRng fork(std::string_view label) const;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t hash_name(std::string_view name);
std::uint64_t mix64(std::uint64_t x);

}  // namespace lowbit
