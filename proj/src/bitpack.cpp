#include "lowbit/bitpack.hpp"

#include <algorithm>
#include <string>

#include "lowbit/errors.hpp"

namespace lowbit {
namespace {

void check_bitwidth(int bitwidth) {
  if (bitwidth < 1 || bitwidth > 8) {
    throw RangeError("bitwidth must be in [1, 8], got " + std::to_string(bitwidth));
  }
}

}  // namespace

std::size_t packed_size(std::size_t count, int bitwidth) {
  check_bitwidth(bitwidth);
  return (count * static_cast<std::size_t>(bitwidth) + 7) / 8;
}

std::vector<std::uint8_t> pack(std::span<const std::uint8_t> codes, int bitwidth) {
  std::vector<std::uint8_t> out(packed_size(codes.size(), bitwidth), 0);
  const unsigned limit = 1u << bitwidth;
  std::size_t bit = 0;
  for (std::size_t i = 0; i < codes.size(); ++i, bit += static_cast<std::size_t>(bitwidth)) {
    const unsigned code = codes[i];
    if (code >= limit) {
      throw RangeError("code " + std::to_string(code) + " at index " + std::to_string(i) +
                       " does not fit in " + std::to_string(bitwidth) + " bits");
    }
    const std::size_t byte = bit / 8;
    const unsigned shift = bit % 8;
    // A code straddles at most two bytes.
    const unsigned wide = code << shift;
    out[byte] |= static_cast<std::uint8_t>(wide & 0xFFu);
    if (shift + static_cast<unsigned>(bitwidth) > 8) {
      out[byte + 1] |= static_cast<std::uint8_t>(wide >> 8);
    }
  }
  return out;
}

std::vector<std::uint8_t> pack(const CodeArray& codes) { return pack(codes.codes, codes.bitwidth); }

CodeArray unpack(std::span<const std::uint8_t> bytes, int bitwidth, std::size_t count) {
  const std::size_t expected = packed_size(count, bitwidth);
  if (bytes.size() != expected) {
    throw FormatError("packed payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected),
                      std::min(bytes.size(), expected));
  }
  CodeArray result{std::vector<std::uint8_t>(count), bitwidth};
  const unsigned mask = (1u << bitwidth) - 1u;
  std::size_t bit = 0;
  for (std::size_t i = 0; i < count; ++i, bit += static_cast<std::size_t>(bitwidth)) {
    const std::size_t byte = bit / 8;
    const unsigned shift = bit % 8;
    unsigned wide = bytes[byte];
    if (shift + static_cast<unsigned>(bitwidth) > 8) wide |= static_cast<unsigned>(bytes[byte + 1]) << 8;
    result.codes[i] = static_cast<std::uint8_t>((wide >> shift) & mask);
  }
  return result;
}

}  // namespace lowbit
