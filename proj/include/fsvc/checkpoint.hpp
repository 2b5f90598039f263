#pragma once

#include <cstdint>
#include <filesystem>

#include "fsvc/protocols.hpp"

namespace fsvc {

/// FSVM layout, all little-endian:
///   "FSVM" | u32 version (=1)
///   | u32 n | n bytes config fingerprint (hex)
///   | u32 n | n bytes method config (canonical JSON)
///   | u32 block count | blocks
/// Each block: u32 n | n bytes name | u32 rows | u32 cols | rows*cols f64, row-major.
/// Blocks: embedding.W, embedding.b, then base_head.W / base_head.b or saliency.queries when present.
inline constexpr char kModelMagic[4] = {'F', 'S', 'V', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);

/// Throws FormatError on bad magic/version, a fingerprint that does not match
/// the stored config, or missing/unexpected blocks; LengthError on truncation.
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace fsvc
