#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fsvc/types.hpp"

namespace fsvc {

/// One video as a T x C_in matrix of per-frame features; row t is frame t.
struct FeatureSequence {
  std::string video_id;
  int class_id = 0;
  Matrix frames;

  Eigen::Index frame_count() const { return frames.rows(); }
  Eigen::Index feature_dim() const { return frames.cols(); }

  /// Throws ValidationError unless T >= 1, C_in >= 1, class_id >= 0 and every entry is finite.
  void validate() const;
};

/// FSVF layout, all little-endian:
///   "FSVF" | u32 version (=1) | u32 T | u32 C_in | T*C_in float32, row-major.
inline constexpr char kFeatureMagic[4] = {'F', 'S', 'V', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 16;

/// Serializes frames as float32. Nothing is written if validation fails.
void write_feature_file(const FeatureSequence& seq, const std::filesystem::path& path);

/// Reads frames only; video_id and class_id come from the manifest.
FeatureSequence read_feature_file(const std::filesystem::path& path);

}  // namespace fsvc
