#include "lowbit/tensor.hpp"

#include <sstream>

namespace lowbit {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? ", " : "") << shape[i];
  out << ')';
  return out.str();
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t r = shape.size(); r-- > 1;) strides[r - 1] = strides[r] * shape[r];
  return strides;
}

}  // namespace lowbit
