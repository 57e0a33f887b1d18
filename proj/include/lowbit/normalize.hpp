#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "lowbit/tensor.hpp"

namespace lowbit {

// How a tensor is divided into groups that share one absmax scale.
struct NormScheme {
  enum class Kind : std::uint8_t { PerTensor = 0, PerAxis = 1, Block = 2, Rank1 = 3, Fixed = 4 };

  Kind kind = Kind::PerTensor;
  std::size_t axis = 0;          // PerAxis
  std::size_t block_size = 128;  // Block
  float fixed_scale = 1.0f;      // Fixed: a constant scale, not data-derived

  static NormScheme per_tensor() { return {}; }
  static NormScheme per_axis(std::size_t axis) { return {Kind::PerAxis, axis, 128, 1.0f}; }
  static NormScheme block(std::size_t block_size);
  static NormScheme rank1() { return {Kind::Rank1, 0, 128, 1.0f}; }
  // Constant scale s: normalized value x/s, clamped by the map. Combined with
  // the uniform map this is the fixed-step quantizer delta*Round(clip(x/delta)).
  static NormScheme fixed(float scale);

  std::uint8_t id() const { return static_cast<std::uint8_t>(kind); }
  // "PerTensor", "Axis1", "B128", "Rank-1", "Fixed".
  std::string name() const;

  friend bool operator==(const NormScheme&, const NormScheme&) = default;
};

// Quantization scales for one tensor. Rank-1 stores one statistics vector
// per axis, concatenated in axis order; every other kind stores a flat list.
struct ScaleState {
  NormScheme scheme;
  Shape shape;
  Eigen::ArrayXf scales;

  friend bool operator==(const ScaleState& a, const ScaleState& b) {
    return a.scheme == b.scheme && a.shape == b.shape && a.scales.size() == b.scales.size() &&
           (a.scales == b.scales).all();
  }
};

// Number of stored scales for a scheme applied to a shape.
std::size_t scale_count(const NormScheme& scheme, const Shape& shape);

// Scales are kept in fp32. Rounding up keeps |x| / scale <= 1.
inline float to_scale(double absmax) {
  auto s = static_cast<float>(absmax);
  if (static_cast<double>(s) < absmax) s = std::nextafter(s, std::numeric_limits<float>::infinity());
  return s;
}

namespace detail {

// Advances a row-major multi-index; returns false after the last element.
inline bool next_index(std::vector<std::size_t>& index, const Shape& shape) {
  for (std::size_t r = shape.size(); r-- > 0;) {
    if (++index[r] < shape[r]) return true;
    index[r] = 0;
  }
  return false;
}

inline std::vector<std::size_t> axis_offsets(const Shape& shape) {
  std::vector<std::size_t> offsets(shape.size() + 1, 0);
  for (std::size_t r = 0; r < shape.size(); ++r) offsets[r + 1] = offsets[r] + shape[r];
  return offsets;
}

void validate_scheme(const NormScheme& scheme, const Shape& shape);

}  // namespace detail

template <typename Scalar>
ScaleState compute_scales(const Tensor<Scalar>& x, const NormScheme& scheme) {
  if (x.size() == 0) throw ShapeError("cannot compute scales of an empty tensor");
  detail::validate_scheme(scheme, x.shape);
  ScaleState state{scheme, x.shape, Eigen::ArrayXf()};
  const Array<Scalar> magnitude = x.values.abs();
  const auto n = static_cast<std::size_t>(x.size());

  switch (scheme.kind) {
    case NormScheme::Kind::PerTensor: {
      state.scales = Eigen::ArrayXf::Constant(1, to_scale(static_cast<double>(magnitude.maxCoeff())));
      break;
    }
    case NormScheme::Kind::Fixed: {
      state.scales = Eigen::ArrayXf::Constant(1, scheme.fixed_scale);
      break;
    }
    case NormScheme::Kind::Block: {
      const std::size_t b = scheme.block_size;
      const std::size_t blocks = (n + b - 1) / b;
      state.scales.resize(static_cast<Eigen::Index>(blocks));
      for (std::size_t k = 0; k < blocks; ++k) {
        const std::size_t begin = k * b;
        const std::size_t len = std::min(b, n - begin);
        state.scales[static_cast<Eigen::Index>(k)] = to_scale(static_cast<double>(
            magnitude.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(len)).maxCoeff()));
      }
      break;
    }
    case NormScheme::Kind::PerAxis:
    case NormScheme::Kind::Rank1: {
      // Rank-1 keeps the per-slice maxima of every axis; PerAxis keeps one.
      const auto offsets = detail::axis_offsets(x.shape);
      std::vector<double> stats(offsets.back(), 0.0);
      if (x.shape.empty()) {
        state.scales = Eigen::ArrayXf::Constant(1, to_scale(static_cast<double>(magnitude.maxCoeff())));
        break;
      }
      std::vector<std::size_t> index(x.shape.size(), 0);
      std::size_t flat = 0;
      do {
        const double m = static_cast<double>(magnitude[static_cast<Eigen::Index>(flat++)]);
        for (std::size_t r = 0; r < index.size(); ++r) {
          double& s = stats[offsets[r] + index[r]];
          s = std::max(s, m);
        }
      } while (detail::next_index(index, x.shape));

      if (scheme.kind == NormScheme::Kind::Rank1) {
        state.scales.resize(static_cast<Eigen::Index>(stats.size()));
        for (std::size_t i = 0; i < stats.size(); ++i) state.scales[static_cast<Eigen::Index>(i)] = to_scale(stats[i]);
      } else {
        const std::size_t a = scheme.axis;
        state.scales.resize(static_cast<Eigen::Index>(x.shape[a]));
        for (std::size_t j = 0; j < x.shape[a]; ++j) {
          state.scales[static_cast<Eigen::Index>(j)] = to_scale(stats[offsets[a] + j]);
        }
      }
      break;
    }
  }
  return state;
}

// Scale applied to the element at `index`. Rank-1 returns the minimum of the
// axis statistics at that position. RangeError on an invalid index.
float elementwise_scale(const ScaleState& state, std::span<const std::size_t> index);

// Per-element scales of the whole tensor, row-major.
Eigen::ArrayXf expand_scales(const ScaleState& state);

template <typename Scalar>
Tensor<Scalar> normalize(const Tensor<Scalar>& x, const ScaleState& state) {
  if (x.shape != state.shape) {
    throw ShapeError("normalize: tensor shape " + shape_string(x.shape) + " vs scale state " +
                     shape_string(state.shape));
  }
  const Array<Scalar> scale = expand_scales(state).template cast<Scalar>();
  return Tensor<Scalar>(x.shape, (scale > Scalar(0)).select(x.values / scale, Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> denormalize(const Tensor<Scalar>& n, const ScaleState& state) {
  if (n.shape != state.shape) {
    throw ShapeError("denormalize: tensor shape " + shape_string(n.shape) + " vs scale state " +
                     shape_string(state.shape));
  }
  const Array<Scalar> scale = expand_scales(state).template cast<Scalar>();
  return Tensor<Scalar>(n.shape, n.values * scale);
}

}  // namespace lowbit
