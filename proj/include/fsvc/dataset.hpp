#pragma once

#include <cstddef>
#include <vector>

#include "fsvc/feature_file.hpp"
#include "fsvc/manifest.hpp"

namespace fsvc {

/// A manifest with every referenced sequence resident in memory.
/// videos[i] corresponds to manifest.videos[i].
struct Dataset {
  Manifest manifest;
  std::vector<FeatureSequence> videos;
};

/// Reads every feature file named by the manifest and checks shapes against
/// frame_count / feature_dim.
Dataset load_dataset(const Manifest& manifest);

/// Re-tags resident sequences with `manifest` (e.g. the output of
/// build_splits) without touching disk. Every video in `manifest` must be
/// present in `source` by video_id.
Dataset select_videos(const Dataset& source, const Manifest& manifest);

/// Videos of one split grouped by class; the sampling view used by episodes
/// and base training.
struct SplitIndex {
  Split split = Split::train;
  std::vector<int> class_ids;                           // sorted
  std::vector<std::vector<std::size_t>> videos_by_class;  // indices into Dataset::videos, ascending

  static SplitIndex build(const Dataset& data, Split split);
  std::size_t video_count() const;
};

}  // namespace fsvc
