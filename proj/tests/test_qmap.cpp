#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "lowbit/errors.hpp"
#include "lowbit/qmap.hpp"
#include "oracles.hpp"

using namespace lowbit;

namespace {

std::vector<double> as_vector(const QuantMap& map) { return {map.values().begin(), map.values().end()}; }

std::vector<QuantMap> all_maps() {
  std::vector<QuantMap> maps;
  for (int bits : {1, 2, 3, 4, 5, 8}) {
    for (bool s : {false, true}) {
      maps.push_back(QuantMap::linear(bits, s));
      maps.push_back(QuantMap::dynamic_exponent(bits, s, true));
      maps.push_back(QuantMap::dynamic_exponent(bits, s, false));
    }
    if (bits >= 2) maps.push_back(QuantMap::uniform(bits));
  }
  return maps;
}

}  // namespace

TEST(QuantMap, LinearFourBitUnsigned) {
  const auto map = QuantMap::linear(4, false);
  ASSERT_EQ(map.size(), 16u);
  EXPECT_DOUBLE_EQ(map.front(), 0.0625);
  EXPECT_DOUBLE_EQ(map.back(), 1.0);
  for (std::size_t i = 1; i < map.size(); ++i) EXPECT_DOUBLE_EQ(map[i] - map[i - 1], 1.0 / 16);
}

TEST(QuantMap, LinearOneBit) {
  EXPECT_EQ(as_vector(QuantMap::linear(1, false)), (std::vector<double>{0.5, 1.0}));
}

TEST(QuantMap, LinearSignedMirrorsUnsigned) {
  const auto map = QuantMap::linear(4, true);
  ASSERT_EQ(map.size(), 16u);
  const auto half = QuantMap::linear(3, false);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_DOUBLE_EQ(map[8 + i], half[i]);
    EXPECT_DOUBLE_EQ(map[7 - i], -half[i]);
  }
  EXPECT_FALSE(map.includes_zero());
}

TEST(QuantMap, DeFourBitMatchesPatternEnumeration) {
  const auto map = QuantMap::dynamic_exponent(4, false, true);
  const auto expected = oracle::de_unsigned(4);
  ASSERT_EQ(map.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(map[i], expected[i], 1e-15);
  EXPECT_TRUE(map.includes_zero());
  EXPECT_LT(map[1], 0.0625);
  EXPECT_NEAR(map[1], 0.00325, 1e-15);
  EXPECT_DOUBLE_EQ(map.back(), 1.0);
}

TEST(QuantMap, DeEightBitMatchesPatternEnumeration) {
  const auto map = QuantMap::dynamic_exponent(8, false, true);
  const auto expected = oracle::de_unsigned(8);
  ASSERT_EQ(map.size(), 256u);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(map[i], expected[i], 1e-15);
}

TEST(QuantMap, DeZeroDropsZero) {
  const auto with = QuantMap::dynamic_exponent(4, false, true);
  const auto without = QuantMap::dynamic_exponent(4, false, false);
  EXPECT_FALSE(without.includes_zero());
  EXPECT_EQ(without.size(), with.size() - 1);
  EXPECT_NEAR(decode(without, 0), 0.00325, 1e-15);
  EXPECT_EQ(without.name(), "DE-0");
  EXPECT_EQ(with.name(), "DE");
}

TEST(QuantMap, SignedDeIsSymmetric) {
  const auto map = QuantMap::dynamic_exponent(4, true, true);
  EXPECT_TRUE(map.includes_zero());
  auto values = as_vector(map);
  for (double v : values) {
    EXPECT_TRUE(std::find_if(values.begin(), values.end(), [&](double w) { return std::abs(w + v) < 1e-15; }) !=
                values.end());
  }
  EXPECT_DOUBLE_EQ(map.front(), -1.0);
  EXPECT_DOUBLE_EQ(map.back(), 1.0);
}

TEST(QuantMap, UniformGrid) {
  const auto map = QuantMap::uniform(8);
  ASSERT_EQ(map.size(), 255u);
  EXPECT_DOUBLE_EQ(map.front(), -1.0);
  EXPECT_DOUBLE_EQ(map[127], 0.0);
  EXPECT_NEAR(map.max_gap(), 1.0 / 127, 1e-15);
}

TEST(QuantMap, ValuesSortedAndInRange) {
  for (const auto& map : all_maps()) {
    const auto v = as_vector(map);
    EXPECT_TRUE(std::is_sorted(v.begin(), v.end())) << map.name();
    EXPECT_TRUE(std::adjacent_find(v.begin(), v.end()) == v.end()) << map.name();
    EXPECT_LE(map.size(), std::size_t{1} << map.bitwidth());
    EXPECT_LE(map.back(), 1.0);
    EXPECT_GE(map.front(), map.is_signed() ? -1.0 : 0.0);
  }
}

TEST(QuantMap, IdRoundtrip) {
  for (const auto& map : all_maps()) EXPECT_EQ(QuantMap::from_id(map.id(), map.bitwidth()), map) << map.name();
  EXPECT_THROW(QuantMap::from_id(0x7F, 4), RangeError);
}

TEST(Encode, NearestExamples) {
  const auto map = QuantMap::linear(4, false);
  EXPECT_EQ(encode_nearest(map, 0.5), 7);
  EXPECT_EQ(encode_nearest(map, 0.03), 0);
  EXPECT_EQ(encode_nearest(map, -3.0), 0);
  EXPECT_EQ(encode_nearest(map, 7.0), 15);
}

TEST(Encode, NearestTieGoesToSmallerIndex) {
  const auto map = QuantMap::linear(4, false);
  EXPECT_EQ(encode_nearest(map, (map[3] + map[4]) / 2), 3);
}

TEST(Encode, NearestMatchesArgminOracle) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> dist(-1.2, 1.2);
  for (const auto& map : all_maps()) {
    const auto values = as_vector(map);
    for (int i = 0; i < 2000; ++i) {
      const double n = dist(gen);
      ASSERT_EQ(encode_nearest(map, n), oracle::argmin_index(values, n)) << map.name() << " n=" << n;
    }
  }
}

TEST(Encode, DecodeEncodeFixpoint) {
  for (const auto& map : all_maps()) {
    for (std::size_t k = 0; k < map.size(); ++k) {
      EXPECT_EQ(decode(map, encode_nearest(map, map[k])), map[k]);
    }
  }
}

TEST(Encode, DecodeOutOfRange) {
  EXPECT_DOUBLE_EQ(decode(QuantMap::linear(4, false), 15), 1.0);
  EXPECT_THROW(decode(QuantMap::dynamic_exponent(4, false, false), 15), RangeError);
}

TEST(Encode, NonFiniteInputRejected) {
  const auto map = QuantMap::linear(4, true);
  CounterRng rng(1);
  EXPECT_THROW(encode_nearest(map, std::nan("")), DomainError);
  EXPECT_THROW(encode_stochastic(map, INFINITY, rng), DomainError);
}

TEST(Encode, StochasticOnGridIsDeterministic) {
  CounterRng rng(3);
  for (const auto& map : all_maps()) {
    for (std::size_t k = 0; k < map.size(); ++k) ASSERT_EQ(encode_stochastic(map, map[k], rng), k);
  }
}

TEST(Encode, StochasticMidpointIsFair) {
  const auto map = QuantMap::linear(4, false);
  CounterRng rng(5);
  const double mid = (map[3] + map[4]) / 2;
  int upper = 0;
  const int trials = 40000;
  for (int i = 0; i < trials; ++i) {
    const auto code = encode_stochastic(map, mid, rng);
    ASSERT_TRUE(code == 3 || code == 4);
    upper += code == 4;
  }
  EXPECT_NEAR(static_cast<double>(upper) / trials, 0.5, 4 * 0.5 / std::sqrt(trials));
}

TEST(Encode, StochasticBracketsInput) {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  CounterRng rng(9);
  for (const auto& map : all_maps()) {
    for (int i = 0; i < 500; ++i) {
      const double n = std::clamp(dist(gen), map.front(), map.back());
      const double d = decode(map, encode_stochastic(map, n, rng));
      const auto lo = std::upper_bound(map.values().begin(), map.values().end(), n) - map.values().begin() - 1;
      ASSERT_GE(lo, 0);
      EXPECT_TRUE(d == map[static_cast<std::size_t>(lo)] ||
                  (static_cast<std::size_t>(lo) + 1 < map.size() && d == map[static_cast<std::size_t>(lo) + 1]));
    }
  }
}

TEST(Encode, StochasticNeedsRng) {
  EXPECT_THROW(encode(QuantMap::linear(4, false), 0.5, Rounding::Stochastic, nullptr), DomainError);
}

TEST(CounterRngTest, KeyedStreamsReproducible) {
  CounterRng a(1, "x", 3), b(1, "x", 3), c(1, "y", 3), d(1, "x", 4);
  const auto first = a();
  EXPECT_EQ(first, b());
  EXPECT_NE(first, c());
  EXPECT_NE(first, d());
}

TEST(CounterRngTest, UniformInUnitInterval) {
  CounterRng rng(42);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(CounterRngTest, NormalMoments) {
  CounterRng rng(43);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}
