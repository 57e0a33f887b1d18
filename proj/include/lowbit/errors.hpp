#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lowbit {

// Value outside an allowed integer or index range (codes, indices).
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Tensor shapes that do not agree, or an operation undefined for a shape.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numeric input outside the domain of an operation (NaN, negative second
// moment, inadmissible step size, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed byte stream. `offset` is the byte position where decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Unresolvable names or inconsistent settings in an experiment description.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace lowbit
