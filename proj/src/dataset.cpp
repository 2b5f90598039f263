#include "fsvc/dataset.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "fsvc/error.hpp"

namespace fsvc {

Dataset load_dataset(const Manifest& manifest) {
  manifest.validate();
  Dataset data;
  data.manifest = manifest;
  data.videos.reserve(manifest.videos.size());
  for (const auto& v : manifest.videos) {
    FeatureSequence seq = read_feature_file(v.file_path);
    if (seq.frames.rows() != manifest.frame_count || seq.frames.cols() != manifest.feature_dim) {
      throw ValidationError("video '" + v.video_id + "' has shape " + std::to_string(seq.frames.rows()) + "x" +
                            std::to_string(seq.frames.cols()) + ", manifest declares " +
                            std::to_string(manifest.frame_count) + "x" + std::to_string(manifest.feature_dim));
    }
    seq.video_id = v.video_id;
    seq.class_id = v.class_id;
    data.videos.push_back(std::move(seq));
  }
  return data;
}

Dataset select_videos(const Dataset& source, const Manifest& manifest) {
  manifest.validate();
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < source.videos.size(); ++i) by_id.emplace(source.videos[i].video_id, i);
  Dataset data;
  data.manifest = manifest;
  data.videos.reserve(manifest.videos.size());
  for (const auto& v : manifest.videos) {
    const auto it = by_id.find(v.video_id);
    if (it == by_id.end()) throw ValidationError("video '" + v.video_id + "' is not in the source dataset");
    FeatureSequence seq = source.videos[it->second];
    seq.class_id = v.class_id;
    data.videos.push_back(std::move(seq));
  }
  return data;
}

SplitIndex SplitIndex::build(const Dataset& data, Split split) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.manifest.videos.size(); ++i) {
    const auto& v = data.manifest.videos[i];
    if (v.split == split) groups[v.class_id].push_back(i);
  }
  SplitIndex index;
  index.split = split;
  for (auto& [id, vids] : groups) {
    index.class_ids.push_back(id);
    index.videos_by_class.push_back(std::move(vids));
  }
  return index;
}

std::size_t SplitIndex::video_count() const {
  std::size_t n = 0;
  for (const auto& v : videos_by_class) n += v.size();
  return n;
}

}  // namespace fsvc
