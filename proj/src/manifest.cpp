#include "fsvc/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fsvc/error.hpp"

namespace fsvc {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

std::vector<int> Manifest::class_ids(Split split) const {
  std::set<int> ids;
  for (const auto& v : videos) {
    if (v.split == split) ids.insert(v.class_id);
  }
  return {ids.begin(), ids.end()};
}

std::vector<int> Manifest::all_class_ids() const {
  std::set<int> ids;
  for (const auto& c : classes) ids.insert(c.class_id);
  for (const auto& v : videos) ids.insert(v.class_id);
  return {ids.begin(), ids.end()};
}

std::optional<std::string> Manifest::class_name(int class_id) const {
  for (const auto& c : classes) {
    if (c.class_id == class_id) return c.name;
  }
  return std::nullopt;
}

namespace {

std::string join_ids(const std::vector<int>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? ", " : "") << ids[i];
  return os.str();
}

}  // namespace

void Manifest::validate() const {
  if (frame_count < 1 || feature_dim < 1) {
    throw ValidationError("manifest frame_count and feature_dim must be >= 1");
  }
  std::set<int> known;
  std::vector<int> duplicate_classes;
  for (const auto& c : classes) {
    if (c.class_id < 0) throw ValidationError("negative class_id " + std::to_string(c.class_id));
    if (!known.insert(c.class_id).second) duplicate_classes.push_back(c.class_id);
  }
  if (!duplicate_classes.empty()) {
    throw ValidationError("duplicate class_ids in manifest: " + join_ids(duplicate_classes));
  }
  std::set<std::string> seen_videos;
  std::map<int, std::set<Split>> splits_of;
  for (const auto& v : videos) {
    if (!known.contains(v.class_id)) {
      throw ValidationError("video '" + v.video_id + "' references unknown class_id " + std::to_string(v.class_id));
    }
    if (!seen_videos.insert(v.video_id).second) {
      throw ValidationError("duplicate video_id '" + v.video_id + "'");
    }
    splits_of[v.class_id].insert(v.split);
  }
  std::vector<int> overlapping;
  for (const auto& [id, splits] : splits_of) {
    if (splits.size() > 1) overlapping.push_back(id);
  }
  if (!overlapping.empty()) {
    throw ValidationError("split class sets overlap; class_ids in more than one split: " + join_ids(overlapping));
  }
}

Manifest load_manifest(const fs::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what());
  }
  const fs::path base = fs::absolute(path).parent_path();
  Manifest m;
  try {
    m.frame_count = doc.at("frame_count").get<int>();
    m.feature_dim = doc.at("feature_dim").get<int>();
    for (const auto& c : doc.at("classes")) {
      m.classes.push_back({c.at("class_id").get<int>(), c.at("name").get<std::string>()});
    }
    for (const auto& v : doc.at("videos")) {
      VideoEntry e;
      e.video_id = v.at("video_id").get<std::string>();
      e.class_id = v.at("class_id").get<int>();
      e.split = parse_split(v.at("split").get<std::string>());
      const fs::path p = fs::path(v.at("file_path").get<std::string>());
      e.file_path = (p.is_absolute() ? p : base / p).lexically_normal();
      m.videos.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest '" + path.string() + "': " + e.what());
  }
  m.validate();
  if (check_files) {
    for (const auto& v : m.videos) {
      if (!fs::exists(v.file_path)) {
        throw IoError("manifest '" + path.string() + "': missing feature file '" + v.file_path.string() + "'");
      }
    }
  }
  return m;
}

void save_manifest(const Manifest& m, const fs::path& path) {
  m.validate();
  const fs::path base = fs::absolute(path).parent_path();
  ordered_json doc;
  doc["frame_count"] = m.frame_count;
  doc["feature_dim"] = m.feature_dim;
  doc["classes"] = ordered_json::array();
  for (const auto& c : m.classes) {
    ordered_json j;
    j["class_id"] = c.class_id;
    j["name"] = c.name;
    doc["classes"].push_back(std::move(j));
  }
  doc["videos"] = ordered_json::array();
  for (const auto& v : m.videos) {
    ordered_json j;
    j["video_id"] = v.video_id;
    j["class_id"] = v.class_id;
    const fs::path rel = v.file_path.is_absolute() ? v.file_path.lexically_relative(base) : v.file_path;
    j["file_path"] = rel.generic_string();
    j["split"] = std::string(to_string(v.split));
    doc["videos"].push_back(std::move(j));
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace fsvc
