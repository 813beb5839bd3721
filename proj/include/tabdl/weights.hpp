#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tabdl/layers.hpp"

// Binary weight container.
//
//   "ADPM"                      4 bytes
//   version                     u8 (= 1)
//   tensor count                u32
//   manifest, per tensor:
//     name length, name         u16, bytes
//     rank, dims                u8, u32 x rank
//     payload offset            u64, from the start of the file
//   payloads                    f32 x size, row-major
//
// All integers and floats are little-endian.

namespace tabdl {

inline constexpr std::uint8_t kWeightFormatVersion = 1;

struct WeightEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;
  std::vector<float> values;
};

std::vector<std::uint8_t> encode_weights(const std::vector<NamedTensor>& tensors);
/// Throws format_error naming `source` on bad magic, version, truncation,
/// or overlapping / out-of-range payloads.
std::vector<WeightEntry> decode_weights(const std::vector<std::uint8_t>& bytes, const std::string& source);

void save_weights(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<WeightEntry> read_weights(const std::filesystem::path& path);

/// Copies stored values into `targets`, matched by name.  Every target must
/// be present with an identical shape; otherwise format_error.
void load_weights(const std::filesystem::path& path, const std::vector<NamedTensor>& targets);
void assign_weights(const std::vector<WeightEntry>& entries, const std::vector<NamedTensor>& targets,
                    const std::string& source);

/// Rounds every value to the nearest 32-bit float, i.e. what a save/load
/// round trip would produce.
void quantize_to_float(const std::vector<NamedTensor>& tensors);

} // namespace tabdl
