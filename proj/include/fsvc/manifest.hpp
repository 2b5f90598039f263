#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fsvc {

enum class Split { train, val, test };

std::string_view to_string(Split s);
/// Throws ValidationError on anything other than train/val/test.
Split parse_split(std::string_view s);

struct ClassEntry {
  int class_id = 0;
  std::string name;
  bool operator==(const ClassEntry&) const = default;
};

struct VideoEntry {
  std::string video_id;
  int class_id = 0;
  /// Absolute after load; written relative to the manifest's directory on save.
  std::filesystem::path file_path;
  Split split = Split::train;
  bool operator==(const VideoEntry&) const = default;
};

struct Manifest {
  std::vector<ClassEntry> classes;
  std::vector<VideoEntry> videos;
  int frame_count = 8;
  int feature_dim = 32;

  bool operator==(const Manifest&) const = default;

  /// Sorted class ids that have at least one video in `split`.
  std::vector<int> class_ids(Split split) const;
  /// Sorted ids of every class referenced by any video or listed in `classes`.
  std::vector<int> all_class_ids() const;
  std::optional<std::string> class_name(int class_id) const;

  /// Checks that class ids are unique, every video names a known class,
  /// video ids are unique and split class sets are pairwise disjoint.
  /// Throws ValidationError listing the offending ids.
  void validate() const;
};

/// Parses the JSON manifest. Relative file paths are resolved against the
/// manifest's directory. When `check_files` is set every file must exist.
Manifest load_manifest(const std::filesystem::path& path, bool check_files = true);

/// Writes the manifest with a fixed key order; output is byte-deterministic.
void save_manifest(const Manifest& m, const std::filesystem::path& path);

}  // namespace fsvc
