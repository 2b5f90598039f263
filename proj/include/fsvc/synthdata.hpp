#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fsvc/dataset.hpp"
#include "fsvc/rng.hpp"
#include "fsvc/types.hpp"

namespace fsvc {

/// Knobs of the synthetic benchmark: each class is a smooth random
/// trajectory of `prototype_length` points and each video samples
/// `frame_count` of them through a random monotone time warp, plus noise.
struct GeneratorSpec {
  int train_classes = 64;
  int val_classes = 12;
  int test_classes = 24;
  int videos_per_class = 20;
  int feature_dim = 32;
  int frame_count = 8;
  int prototype_length = 32;
  double noise_sigma = 0.5;
  double warp_strength = 0.6;
  std::uint64_t seed = 0;
  /// Extra classes, disjoint from every split, written to a separate pretraining manifest.
  int pretrain_classes = 0;
  /// Rank of the input subspace shared by every class trajectory (base,
  /// novel and pretraining alike); noise stays isotropic. 0 = full rank,
  /// each input dimension an independent walk.
  int signal_rank = 0;

  /// Throws ValidationError on out-of-range fields.
  void validate() const;
};

GeneratorSpec load_generator_spec(const std::filesystem::path& path);
void save_generator_spec(const GeneratorSpec& spec, const std::filesystem::path& path);

/// Cumulative sum of standard-normal steps, each column then centered and
/// scaled to unit (population) variance. With length 1 the raw step is kept.
Matrix gen_class_prototype(RngStream& rng, int feature_dim, int length);

/// rank x feature_dim Gaussian matrix, columns scaled to unit norm.
Matrix gen_signal_basis(RngStream& rng, int rank, int feature_dim);

/// Walk in basis.rows() latent dimensions, standardized there, then mapped
/// through `basis`. Output columns are centered; unit variance only on average.
Matrix gen_class_prototype(RngStream& rng, const Matrix& basis, int length);

/// Strictly increasing prototype row indices for one video. Positions are
/// (1 - w) * uniform spacing + w * random Dirichlet spacing, w = warp_strength,
/// then rounded and nudged so the list stays strictly increasing.
std::vector<int> sample_warp_indices(RngStream& rng, int frame_count, int prototype_length, double warp_strength);

/// Draws warp indices, gathers those prototype rows and adds N(0, noise_sigma^2)
/// noise. Values are rounded to float32 so in-memory data equals its FSVF file.
FeatureSequence gen_video(const Matrix& prototype, const GeneratorSpec& spec, RngStream& rng);

struct SyntheticBenchmark {
  Dataset benchmark;
  std::optional<Dataset> pretrain;
};

/// Builds the benchmark in memory. File paths are relative ("videos/<id>.fsvf").
SyntheticBenchmark generate_benchmark(const GeneratorSpec& spec);

struct BenchmarkManifests {
  Manifest benchmark;
  std::optional<Manifest> pretrain;
};

/// Writes out_dir/videos/*.fsvf, out_dir/manifest.json and, when
/// pretrain_classes > 0, out_dir/pretrain_manifest.json.
BenchmarkManifests gen_benchmark(const GeneratorSpec& spec, const std::filesystem::path& out_dir);

}  // namespace fsvc
