#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mltsf/synth.hpp"

// Feature file layout, all little-endian:
//   "MLTS" | u32 version=1 | u32 T | u32 C' | u32 L | L x u32 label ids | T*C' x f32 values (row-major)
// Values are stored as f32; doubles that are not exactly representable are rounded on write.
namespace mltsf {

inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_features(const LabeledSample& sample);
// Labels must be non-blank and < vocab_size. The sample seed is not stored and decodes as 0.
LabeledSample decode_features(std::span<const std::uint8_t> bytes, std::size_t vocab_size);

void write_features(const std::filesystem::path& path, const LabeledSample& sample);
LabeledSample read_features(const std::filesystem::path& path, std::size_t vocab_size);

}  // namespace mltsf
