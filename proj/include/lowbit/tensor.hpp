#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "lowbit/errors.hpp"

namespace lowbit {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

template <typename Scalar>
using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Dense N-d tensor stored flat in row-major order.
template <typename Scalar>
struct Tensor {
  using scalar_type = Scalar;

  Shape shape;
  Array<Scalar> values;

  Tensor() = default;
  Tensor(Shape s, Array<Scalar> v) : shape(std::move(s)), values(std::move(v)) {
    if (static_cast<std::size_t>(values.size()) != numel(shape)) {
      throw ShapeError("tensor values do not match shape " + shape_string(shape));
    }
  }

  static Tensor zeros(Shape s) {
    const auto n = static_cast<Eigen::Index>(numel(s));
    return Tensor(std::move(s), Array<Scalar>::Zero(n));
  }

  static Tensor filled(Shape s, Scalar value) {
    const auto n = static_cast<Eigen::Index>(numel(s));
    return Tensor(std::move(s), Array<Scalar>::Constant(n, value));
  }

  Eigen::Index size() const { return values.size(); }
  std::size_t ndim() const { return shape.size(); }

  // Row-major matrix view of a 2-D tensor.
  Eigen::Map<const RowMajorMatrix<Scalar>> matrix() const {
    require_2d();
    return {values.data(), static_cast<Eigen::Index>(shape[0]),
            static_cast<Eigen::Index>(shape[1])};
  }
  Eigen::Map<RowMajorMatrix<Scalar>> matrix() {
    require_2d();
    return {values.data(), static_cast<Eigen::Index>(shape[0]),
            static_cast<Eigen::Index>(shape[1])};
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape, values.template cast<Other>());
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && (a.values == b.values).all();
  }

 private:
  void require_2d() const {
    if (shape.size() != 2) throw ShapeError("matrix view needs a 2-D tensor, got " + shape_string(shape));
  }
};

using TensorD = Tensor<double>;
using TensorF = Tensor<float>;

template <typename Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (a.shape != b.shape) {
    throw ShapeError(std::string(what) + ": shape " + shape_string(a.shape) + " vs " +
                     shape_string(b.shape));
  }
}

// Row-major strides (in elements) for `shape`.
std::vector<std::size_t> row_major_strides(const Shape& shape);

}  // namespace lowbit

namespace lowbit {

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Tensor<Scalar> value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

template <typename Scalar>
using ParamList = std::vector<NamedTensor<Scalar>>;

}  // namespace lowbit
