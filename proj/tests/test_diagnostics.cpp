#include <gtest/gtest.h>

#include <random>

#include "lowbit/diagnostics.hpp"
#include "lowbit/errors.hpp"
#include "lowbit/quantizer.hpp"

using namespace lowbit;

namespace {

TensorD vec(std::vector<double> v) {
  return TensorD({v.size()}, Eigen::Map<Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size())));
}

}  // namespace

TEST(RelativeError, Identical) {
  const auto x = vec({1, 0, -2, 0});
  const auto r = relative_error(x, x);
  EXPECT_EQ(*r.rel_l2, 0.0);
  EXPECT_EQ(r.zero_fraction, 0.5);
  EXPECT_EQ(r.max_abs, 0.0);
}

TEST(RelativeError, AllZeroApproximation) {
  const auto r = relative_error(vec({1, 2, 3}), vec({0, 0, 0}));
  EXPECT_DOUBLE_EQ(*r.rel_l2, 1.0);
  EXPECT_EQ(r.zero_fraction, 1.0);
  EXPECT_EQ(r.max_abs, 3.0);
}

TEST(RelativeError, ZeroReferenceIsUndefined) {
  EXPECT_FALSE(relative_error(vec({0, 0}), vec({1, 0})).rel_l2.has_value());
  EXPECT_THROW(relative_error(vec({0, 0}), vec({1})), ShapeError);
}

TEST(RelativeError, MatchesScalarRecomputation) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> dist;
  TensorD x = TensorD::zeros({10000});
  for (Eigen::Index i = 0; i < x.size(); ++i) x.values[i] = dist(gen);
  const auto y = dequantize<double>(quantize(x, parse_quantizer_spec("B128/DE", true)));
  double num = 0, den = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    num += (x.values[i] - y.values[i]) * (x.values[i] - y.values[i]);
    den += x.values[i] * x.values[i];
  }
  EXPECT_NEAR(*relative_error(x, y).rel_l2, std::sqrt(num) / std::sqrt(den), 1e-12);
}

TEST(RelativeError, AccumulatorPoolsTensors) {
  ErrorAccumulator acc;
  EXPECT_TRUE(acc.empty());
  Eigen::ArrayXd a(2), b(2), c(1), d(1);
  a << 3, 0;
  b << 3, 1;
  c << 4;
  d << 4;
  acc.add(a, b);
  acc.add(c, d);
  const auto r = acc.report();
  EXPECT_DOUBLE_EQ(*r.rel_l2, 1.0 / 5.0);
  EXPECT_EQ(r.count, 3u);
}

TEST(InvSqrt, IdenticalIsZero) {
  const auto v = vec({1e-4, 1, 3});
  EXPECT_EQ(*inv_sqrt_error(v, v).rel_l2, 0.0);
}

TEST(InvSqrt, ZeroPointBlowUp) {
  const auto h = inv_sqrt_transform(Eigen::ArrayXd::Constant(1, 1e-4), 1e-6);
  EXPECT_NEAR(h[0], 1.0 / (0.01 + 1e-6), 1e-9);
  const auto r = inv_sqrt_error(vec({1e-4}), vec({0}), 1e-6);
  EXPECT_NEAR(*r.rel_l2, (1e6 - h[0]) / h[0], 1e-6);
  EXPECT_GT(*r.rel_l2, 9e3);
  EXPECT_EQ(r.zero_fraction, 1.0);
  EXPECT_THROW(inv_sqrt_error(vec({-1}), vec({1})), DomainError);
}

TEST(InvSqrt, DeZeroMapHasNoZeros) {
  std::mt19937_64 gen(2);
  std::exponential_distribution<double> dist(1.0);
  TensorD v = TensorD::zeros({4096});
  for (Eigen::Index i = 0; i < v.size(); ++i) v.values[i] = std::pow(dist(gen), 6) * 1e-6;
  const auto spec0 = parse_quantizer_spec("B128/DE-0", false);
  const auto spec = parse_quantizer_spec("B128/DE", false);
  const auto r0 = inv_sqrt_error(v, dequantize<double>(quantize(v, spec0)));
  const auto r = inv_sqrt_error(v, dequantize<double>(quantize(v, spec)));
  EXPECT_EQ(r0.zero_fraction, 0.0);
  EXPECT_GT(r.zero_fraction, 0.0);
  EXPECT_GT(*r.rel_l2, *r0.rel_l2);
}

TEST(BinChange, Cases) {
  const auto a = vec({0, 1, 2});
  EXPECT_EQ(bin_change_ratio(a, a, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(bin_change_ratio(a, vec({0.5, 0.5, 2.5}), 0.5), 1.0);
  EXPECT_THROW(bin_change_ratio(a, a, 0.0), DomainError);
  EXPECT_THROW(bin_change_ratio(a, a, Eigen::ArrayXd::Constant(3, -1.0)), DomainError);
}

TEST(HistogramTest, ConstantSingleBin) {
  const auto h = histogram(Eigen::ArrayXd::Constant(50, 3.0), 10);
  int occupied = 0;
  for (double d : h.densities) occupied += d > 0;
  EXPECT_EQ(occupied, 1);
}

TEST(HistogramTest, NormalizedAndUniform) {
  CounterRng rng(3);
  Eigen::ArrayXd x(100000);
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  const auto h = histogram(x, 10);
  double mass = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    mass += h.densities[b] * (h.edges[b + 1] - h.edges[b]);
    EXPECT_NEAR(h.densities[b], 1.0, 0.05);
  }
  EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(HistogramTest, LogScale) {
  Eigen::ArrayXd x(3);
  x << 1e-3, 1e-2, 1;
  const auto h = histogram(x, 3, true);
  EXPECT_NEAR(h.edges.front(), -3.0, 1e-12);
  EXPECT_NEAR(h.edges.back(), 0.0, 1e-12);
  x[0] = 0;
  EXPECT_THROW(histogram(x, 3, true), DomainError);
}
