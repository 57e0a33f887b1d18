#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lowbit {

// Fixed-width unsigned codes, 1 to 8 bits each.
struct CodeArray {
  std::vector<std::uint8_t> codes;
  int bitwidth = 8;

  friend bool operator==(const CodeArray&, const CodeArray&) = default;
};

// Bytes needed to hold `count` codes of `bitwidth` bits.
std::size_t packed_size(std::size_t count, int bitwidth);

// Codes are laid out least-significant-bit first: code i occupies bits
// [i*b, (i+1)*b) of the little-endian bit stream. Unused high bits of the
// last byte are zero. Throws RangeError on a code >= 2^bitwidth.
std::vector<std::uint8_t> pack(std::span<const std::uint8_t> codes, int bitwidth);
std::vector<std::uint8_t> pack(const CodeArray& codes);

// Inverse of pack. Padding bits are ignored. Throws FormatError when the
// byte count does not match packed_size(count, bitwidth).
CodeArray unpack(std::span<const std::uint8_t> bytes, int bitwidth, std::size_t count);

}  // namespace lowbit
