#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fsvc/align.hpp"
#include "fsvc/dataset.hpp"
#include "fsvc/episode.hpp"
#include "fsvc/heads.hpp"
#include "fsvc/rng.hpp"

namespace fsvc {

/// Per-frame affine embedding applied to every frame independently: e_t = W x_t + b.
struct EmbeddingParams {
  Matrix W;  // C x C_in
  Vector b;  // C

  /// Uniform(-1/sqrt(C_in), 1/sqrt(C_in)) entries.
  static EmbeddingParams random(int out_dim, int in_dim, RngStream& rng);

  /// T x C_in -> T x C.
  Matrix embed(const Matrix& frames) const;
  Vector embed_vector(const Eigen::Ref<const Vector>& x) const { return W * x + b; }
};

struct EmbeddingGrad {
  Matrix dW;
  Vector db;

  static EmbeddingGrad zeros_like(const EmbeddingParams& p);
  /// Accumulates the contribution of dL/dE for embedded frames E = X W^T + 1 b^T.
  void add_frames(const Matrix& d_embedded, const Matrix& frames);
  void add_vector(const Eigen::Ref<const Vector>& d_embedded, const Eigen::Ref<const Vector>& x);
};

enum class Method { meta_baseline, cmn_lite, otam_lite, baseline, baseline_plus };

std::string_view to_string(Method m);
/// Throws ValidationError on unknown names.
Method parse_method(std::string_view name);
bool is_classifier_based(Method m);

enum class InitMode { scratch, pretrained };
std::string_view to_string(InitMode m);
InitMode parse_init(std::string_view name);

struct MethodConfig {
  Method method = Method::baseline_plus;
  int n_way = 5;
  int k_shot = 1;
  double temperature = 10.0;
  /// Unset means the learning-rate schedule default for (method, init); see base_lr().
  std::optional<double> lr_base;
  double lr_adapt = 5e-3;
  /// Head training iterations at test time (baseline: fresh head; baseline-plus: after imprinting).
  int iters_adapt = 100;
  /// Dropout before the base classifier; only used by baseline-plus.
  double dropout_p = 0.5;
  InitMode init = InitMode::scratch;
  std::uint64_t seed = 0;

  int embed_dim = 16;
  int saliency_heads = 4;
  bool dtw_normalize = false;

  int batch_size = 32;
  int epochs = 30;
  int episodes_per_epoch = 200;
  int val_episodes = 200;
  /// Epochs without validation improvement before stopping; 0 disables early stopping.
  int patience = 5;
  int pretrain_epochs = 20;

  /// 1e-3 from scratch; 1e-4 (classifier-based) or 1e-5 (metric-based) when pretrained.
  double base_lr() const;
  /// Dropout actually used in base training.
  double train_dropout() const { return method == Method::baseline_plus ? dropout_p : 0.0; }

  /// Canonical JSON with a fixed key order.
  std::string to_json() const;
  static MethodConfig from_json(std::string_view text);
  /// Hex FNV-1a of to_json().
  std::string fingerprint() const;
  void validate() const;
};

struct TrainedModel {
  MethodConfig config;
  EmbeddingParams embedding;
  std::optional<LinearHead> base_head;     // classifier-based methods
  std::optional<SaliencyParams> saliency;  // cmn-lite
  /// Validation accuracy of the selected checkpoint (NaN when no validation split).
  double val_accuracy = 0.0;
  /// Mean training loss per completed epoch. Not persisted.
  std::vector<double> epoch_losses;

  /// Checks that component presence matches the method and shapes agree.
  void validate() const;
  /// FNV-1a over every parameter's bytes.
  std::uint64_t weights_fingerprint() const;
};

// ---------------------------------------------------------------------------
// Losses with analytic gradients. These are the hand-derived backward passes
// the trainers use; they are exposed so tests can check them against finite
// differences.

struct ClassificationGrad {
  double loss;
  EmbeddingGrad embedding;
  Matrix dW_head;
  Vector db_head;
};

/// Mean cross-entropy over a batch: mean_pool(embed(x)) -> (* mask) -> head.
/// `pooled_inputs` holds one mean-pooled raw sequence per row (the affine
/// embedding commutes with mean pooling). `masks` is either empty or one
/// dropout mask per row (length C).
ClassificationGrad classification_loss_grad(const EmbeddingParams& emb, const LinearHead& head,
                                            const Matrix& pooled_inputs, std::span<const int> labels,
                                            const Matrix& masks);

struct EpisodeGrad {
  double loss;
  Vector similarities;  // one per class, before temperature scaling
  EmbeddingGrad embedding;
  Matrix d_saliency;                 // cmn-lite only
  std::vector<AlignmentPath> paths;  // otam-lite only, one per support in episode order
};

/// Cross-entropy over temperature-scaled class similarities of a metric
/// method. For otam-lite, `frozen_paths` (one per support) replaces the DTW
/// optimum; gradients always treat the paths as constants.
EpisodeGrad episode_loss_grad(Method method, const EmbeddingParams& emb, const SaliencyParams* saliency,
                              const Episode& episode, double temperature, bool dtw_normalize,
                              const std::vector<AlignmentPath>* frozen_paths = nullptr);

/// Similarity of the query to each class representative (metric methods).
Vector class_similarities(const TrainedModel& model, const Episode& episode, const MethodConfig& cfg);

// ---------------------------------------------------------------------------
// Training.

/// Random embedding for the config's seed; the init every trainer starts from without pretraining.
EmbeddingParams initial_embedding(const MethodConfig& cfg, int in_dim);

/// Classification pretraining on disjoint classes. Throws LeakageError if a
/// pretraining class id appears in `benchmark`. With zero pretraining videos
/// the random init is returned unchanged.
EmbeddingParams pretrain_embedding(const Dataset& pretrain, const Manifest& benchmark, const MethodConfig& cfg);

/// Baseline / baseline-plus base stage: embedding and linear head trained
/// jointly with Adam on mini-batches of the train split, checkpoint selected by
/// validation-episode accuracy.
TrainedModel train_classification(const Dataset& data, const MethodConfig& cfg, const EmbeddingParams& init);

/// Episodic training for meta-baseline, cmn-lite and otam-lite.
TrainedModel meta_train(const Dataset& data, const MethodConfig& cfg, const EmbeddingParams& init);

/// Dispatches on cfg.method and cfg.init. `pretrain` is required when cfg.init is pretrained.
TrainedModel train_model(const Dataset& data, const MethodConfig& cfg, const Dataset* pretrain = nullptr);

// ---------------------------------------------------------------------------
// Test-time adaptation.

/// Predicted local label for the episode's query. Never modifies `model`.
int adapt_and_predict(const TrainedModel& model, const Episode& episode, const MethodConfig& cfg, RngStream& rng);

/// Mean 0/1 accuracy over `count` episodes of `split` drawn from streams
/// [stream_base, stream_base + count) of `seed`. Used for checkpoint selection.
double episode_accuracy(const TrainedModel& model, const Dataset& data, const SplitIndex& split,
                        const MethodConfig& cfg, int count, std::uint64_t seed, std::uint64_t stream_base);

}  // namespace fsvc
