#include "fsvc/episode.hpp"

#include <set>
#include <string>

#include "fsvc/error.hpp"

namespace fsvc {

bool Episode::well_formed() const {
  if (n_way < 1 || k_shot < 1 || query.seq == nullptr) return false;
  if (support.size() != static_cast<std::size_t>(n_way) * static_cast<std::size_t>(k_shot)) return false;
  if (class_map.size() != static_cast<std::size_t>(n_way)) return false;
  if (std::set<int>(class_map.begin(), class_map.end()).size() != class_map.size()) return false;
  std::vector<int> per_label(static_cast<std::size_t>(n_way), 0);
  std::set<std::string> ids;
  for (const auto& s : support) {
    if (s.seq == nullptr || s.label < 0 || s.label >= n_way) return false;
    ++per_label[static_cast<std::size_t>(s.label)];
    ids.insert(s.seq->video_id);
  }
  for (int c : per_label) {
    if (c != k_shot) return false;
  }
  if (query.label < 0 || query.label >= n_way) return false;
  return !ids.contains(query.seq->video_id);
}

Episode sample_episode(const Dataset& data, const SplitIndex& split, int n_way, int k_shot, RngStream& rng) {
  if (n_way < 1 || k_shot < 1) throw ValidationError("n_way and k_shot must be >= 1");
  if (split.class_ids.size() < static_cast<std::size_t>(n_way)) {
    throw CapacityError(std::string(to_string(split.split)) + " split has " + std::to_string(split.class_ids.size()) +
                        " classes, " + std::to_string(n_way) + "-way episodes need " + std::to_string(n_way));
  }
  for (std::size_t c = 0; c < split.class_ids.size(); ++c) {
    if (split.videos_by_class[c].size() < static_cast<std::size_t>(k_shot) + 1) {
      throw CapacityError("class " + std::to_string(split.class_ids[c]) + " has " +
                          std::to_string(split.videos_by_class[c].size()) + " videos, " + std::to_string(k_shot) +
                          "-shot episodes need " + std::to_string(k_shot + 1));
    }
  }
  Episode ep;
  ep.n_way = n_way;
  ep.k_shot = k_shot;
  const auto classes = rng.sample_without_replacement(split.class_ids.size(), static_cast<std::size_t>(n_way));
  const int query_label = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_way)));
  for (int k = 0; k < n_way; ++k) {
    const auto& pool = split.videos_by_class[classes[static_cast<std::size_t>(k)]];
    const std::size_t take = static_cast<std::size_t>(k_shot) + (k == query_label ? 1 : 0);
    const auto picks = rng.sample_without_replacement(pool.size(), take);
    for (int j = 0; j < k_shot; ++j) {
      ep.support.push_back({&data.videos[pool[picks[static_cast<std::size_t>(j)]]], k});
    }
    if (k == query_label) ep.query = {&data.videos[pool[picks.back()]], k};
    ep.class_map.push_back(split.class_ids[classes[static_cast<std::size_t>(k)]]);
  }
  return ep;
}

}  // namespace fsvc
