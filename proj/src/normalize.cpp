#include "lowbit/normalize.hpp"

#include <limits>

namespace lowbit {

NormScheme NormScheme::block(std::size_t block_size) {
  if (block_size < 1) throw ShapeError("block size must be at least 1");
  return {Kind::Block, 0, block_size, 1.0f};
}

NormScheme NormScheme::fixed(float scale) {
  if (!(scale > 0.0f) || !std::isfinite(scale)) throw DomainError("fixed scale must be positive and finite");
  return {Kind::Fixed, 0, 128, scale};
}

std::string NormScheme::name() const {
  switch (kind) {
    case Kind::PerTensor: return "PerTensor";
    case Kind::PerAxis: return "Axis" + std::to_string(axis);
    case Kind::Block: return "B" + std::to_string(block_size);
    case Kind::Rank1: return "Rank-1";
    case Kind::Fixed: return "Fixed";
  }
  return "?";
}

namespace detail {

void validate_scheme(const NormScheme& scheme, const Shape& shape) {
  if (scheme.kind == NormScheme::Kind::PerAxis && scheme.axis >= shape.size()) {
    throw ShapeError("axis " + std::to_string(scheme.axis) + " out of range for shape " + shape_string(shape));
  }
  if (scheme.kind == NormScheme::Kind::Block && scheme.block_size < 1) {
    throw ShapeError("block size must be at least 1");
  }
}

}  // namespace detail

std::size_t scale_count(const NormScheme& scheme, const Shape& shape) {
  detail::validate_scheme(scheme, shape);
  switch (scheme.kind) {
    case NormScheme::Kind::PerTensor:
    case NormScheme::Kind::Fixed: return 1;
    case NormScheme::Kind::PerAxis: return shape[scheme.axis];
    case NormScheme::Kind::Block: return (numel(shape) + scheme.block_size - 1) / scheme.block_size;
    case NormScheme::Kind::Rank1: return shape.empty() ? 1 : detail::axis_offsets(shape).back();
  }
  return 0;
}

float elementwise_scale(const ScaleState& state, std::span<const std::size_t> index) {
  const Shape& shape = state.shape;
  if (index.size() != shape.size()) throw RangeError("index rank does not match tensor rank");
  for (std::size_t r = 0; r < shape.size(); ++r) {
    if (index[r] >= shape[r]) throw RangeError("index out of range on axis " + std::to_string(r));
  }
  switch (state.scheme.kind) {
    case NormScheme::Kind::PerTensor:
    case NormScheme::Kind::Fixed: return state.scales[0];
    case NormScheme::Kind::PerAxis: return state.scales[static_cast<Eigen::Index>(index[state.scheme.axis])];
    case NormScheme::Kind::Block: {
      const auto strides = row_major_strides(shape);
      std::size_t flat = 0;
      for (std::size_t r = 0; r < shape.size(); ++r) flat += index[r] * strides[r];
      return state.scales[static_cast<Eigen::Index>(flat / state.scheme.block_size)];
    }
    case NormScheme::Kind::Rank1: {
      if (shape.empty()) return state.scales[0];
      const auto offsets = detail::axis_offsets(shape);
      float m = std::numeric_limits<float>::infinity();
      for (std::size_t r = 0; r < shape.size(); ++r) {
        m = std::min(m, state.scales[static_cast<Eigen::Index>(offsets[r] + index[r])]);
      }
      return m;
    }
  }
  return 0.0f;
}

Eigen::ArrayXf expand_scales(const ScaleState& state) {
  const Shape& shape = state.shape;
  const auto n = static_cast<Eigen::Index>(numel(shape));
  Eigen::ArrayXf out(n);
  switch (state.scheme.kind) {
    case NormScheme::Kind::PerTensor:
    case NormScheme::Kind::Fixed: out.setConstant(state.scales[0]); break;
    case NormScheme::Kind::Block: {
      const auto b = static_cast<Eigen::Index>(state.scheme.block_size);
      for (Eigen::Index i = 0; i < n; ++i) out[i] = state.scales[i / b];
      break;
    }
    case NormScheme::Kind::PerAxis:
    case NormScheme::Kind::Rank1: {
      if (shape.empty()) {
        out.setConstant(state.scales[0]);
        break;
      }
      const bool rank1 = state.scheme.kind == NormScheme::Kind::Rank1;
      const auto offsets = detail::axis_offsets(shape);
      std::vector<std::size_t> index(shape.size(), 0);
      Eigen::Index flat = 0;
      do {
        if (rank1) {
          float m = std::numeric_limits<float>::infinity();
          for (std::size_t r = 0; r < shape.size(); ++r) {
            m = std::min(m, state.scales[static_cast<Eigen::Index>(offsets[r] + index[r])]);
          }
          out[flat++] = m;
        } else {
          out[flat++] = state.scales[static_cast<Eigen::Index>(index[state.scheme.axis])];
        }
      } while (detail::next_index(index, shape));
      break;
    }
  }
  return out;
}

}  // namespace lowbit
