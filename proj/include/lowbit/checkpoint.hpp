#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "lowbit/quantizer.hpp"
#include "lowbit/tensor.hpp"

namespace lowbit {

// Little-endian state archive:
//   "QST4" | u16 version=1 | u32 entry count
//   per entry: u16 name length, UTF-8 name, u8 storage tag (0 fp32, 1 packed),
//     u8 ndim, u64 dims...
//     fp32:   u64 payload bytes, f32 values row-major
//     packed: u8 bitwidth, u8 map id, u8 scheme id, [u32 block size | u8 axis],
//             u64 scale count, f32 scales, u64 payload bytes, payload
using CheckpointValue = std::variant<TensorF, PackedTensor>;

struct CheckpointEntry {
  std::string name;
  CheckpointValue value;

  friend bool operator==(const CheckpointEntry&, const CheckpointEntry&) = default;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(std::span<const CheckpointEntry> entries);
std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(std::span<const CheckpointEntry> entries, const std::filesystem::path& path);
std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path);

}  // namespace lowbit
