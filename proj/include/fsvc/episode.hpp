#pragma once

#include <vector>

#include "fsvc/dataset.hpp"
#include "fsvc/rng.hpp"

namespace fsvc {

struct LabelledSequence {
  const FeatureSequence* seq;  // non-owning; points into a Dataset
  int label;                   // local label 0..n_way-1
};

/// One n-way k-shot task with a single query. Sequences are borrowed from the
/// Dataset the episode was sampled from, which must outlive it.
struct Episode {
  int n_way = 0;
  int k_shot = 0;
  std::vector<LabelledSequence> support;  // label-major: support[k * k_shot + j].label == k
  LabelledSequence query{nullptr, 0};
  std::vector<int> class_map;  // local label -> global class_id

  /// Exactly n_way classes with k_shot supports each, labels in range, and
  /// the query video is not among the supports.
  bool well_formed() const;
};

/// Uniformly picks n_way classes, then k_shot supports per class without
/// replacement; one sampled class additionally yields the query. Local labels
/// follow the sampled class order. Throws CapacityError if the split has fewer
/// than n_way classes or any class has fewer than k_shot + 1 videos.
Episode sample_episode(const Dataset& data, const SplitIndex& split, int n_way, int k_shot, RngStream& rng);

}  // namespace fsvc
