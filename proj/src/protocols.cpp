#include "fsvc/protocols.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "fsvc/error.hpp"

namespace fsvc {

namespace {

constexpr std::uint64_t kInitStream = 1ULL << 48;
constexpr std::uint64_t kTrainStream = 2ULL << 48;
constexpr std::uint64_t kValStreams = 3ULL << 48;
constexpr std::uint64_t kPretrainStream = 4ULL << 48;

std::vector<std::vector<std::size_t>> supports_by_label(const Episode& ep) {
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(ep.n_way));
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    const int label = ep.support[i].label;
    if (label < 0 || label >= ep.n_way) throw ValidationError("support label out of range");
    groups[static_cast<std::size_t>(label)].push_back(i);
  }
  for (int k = 0; k < ep.n_way; ++k) {
    if (groups[static_cast<std::size_t>(k)].empty()) {
      throw CoverageError("episode class " + std::to_string(k) + " has no support sample");
    }
  }
  return groups;
}

// Mean pooling (meta-baseline). Embedding is affine, so the class prototype of
// embedded means equals the embedding of the mean raw input.
class MeanPoolPass {
 public:
  MeanPoolPass(const EmbeddingParams& emb, const Episode& ep) : groups_(supports_by_label(ep)) {
    query_in_ = mean_pool(ep.query.seq->frames);
    query_ = emb.embed_vector(query_in_);
    for (const auto& members : groups_) {
      Vector acc = Vector::Zero(query_in_.size());
      for (std::size_t i : members) acc += mean_pool(ep.support[i].seq->frames);
      proto_in_.push_back(acc / static_cast<double>(members.size()));
      protos_.push_back(emb.embed_vector(proto_in_.back()));
    }
  }

  Vector forward() {
    Vector sims(static_cast<Eigen::Index>(protos_.size()));
    cos_.clear();
    for (std::size_t k = 0; k < protos_.size(); ++k) {
      cos_.push_back(cosine_with_grad(query_, protos_[k]));
      sims(static_cast<Eigen::Index>(k)) = cos_.back().value;
    }
    return sims;
  }

  void backward(const Vector& dsims, EpisodeGrad& g) const {
    Vector dq = Vector::Zero(query_.size());
    for (std::size_t k = 0; k < protos_.size(); ++k) {
      const double ds = dsims(static_cast<Eigen::Index>(k));
      dq += ds * cos_[k].d_a;
      g.embedding.add_vector(ds * cos_[k].d_b, proto_in_[k]);
    }
    g.embedding.add_vector(dq, query_in_);
  }

 private:
  std::vector<std::vector<std::size_t>> groups_;
  Vector query_in_;
  Vector query_;
  std::vector<Vector> proto_in_;
  std::vector<Vector> protos_;
  std::vector<CosineGrad> cos_;
};

// Multi-saliency descriptors (cmn-lite); class representative is the mean descriptor.
class SaliencyPass {
 public:
  SaliencyPass(const EmbeddingParams& emb, const SaliencyParams& sal, const Episode& ep)
      : sal_(sal), groups_(supports_by_label(ep)) {
    add_video(emb, ep.query.seq->frames);
    for (const auto& s : ep.support) add_video(emb, s.seq->frames);
    for (const auto& members : groups_) {
      Matrix acc = Matrix::Zero(sal.queries.rows(), sal.queries.cols());
      for (std::size_t i : members) acc += videos_[i + 1].out.descriptor;
      protos_.push_back(acc / static_cast<double>(members.size()));
    }
  }

  Vector forward() {
    const Eigen::Index heads = sal_.queries.rows();
    Vector sims(static_cast<Eigen::Index>(protos_.size()));
    cos_.assign(protos_.size(), {});
    for (std::size_t k = 0; k < protos_.size(); ++k) {
      double sum = 0.0;
      for (Eigen::Index s = 0; s < heads; ++s) {
        cos_[k].push_back(cosine_with_grad(videos_[0].out.descriptor.row(s).transpose(), protos_[k].row(s).transpose()));
        sum += cos_[k].back().value;
      }
      sims(static_cast<Eigen::Index>(k)) = sum / static_cast<double>(heads);
    }
    return sims;
  }

  void backward(const Vector& dsims, EpisodeGrad& g) const {
    const Eigen::Index heads = sal_.queries.rows();
    std::vector<Matrix> d_desc(videos_.size(), Matrix::Zero(heads, sal_.queries.cols()));
    for (std::size_t k = 0; k < protos_.size(); ++k) {
      const double ds = dsims(static_cast<Eigen::Index>(k)) / static_cast<double>(heads);
      Matrix d_proto(heads, sal_.queries.cols());
      for (Eigen::Index s = 0; s < heads; ++s) {
        const auto& c = cos_[k][static_cast<std::size_t>(s)];
        d_desc[0].row(s) += ds * c.d_a.transpose();
        d_proto.row(s) = ds * c.d_b.transpose();
      }
      const double share = 1.0 / static_cast<double>(groups_[k].size());
      for (std::size_t i : groups_[k]) d_desc[i + 1] += share * d_proto;
    }
    const double scale = sal_.scale();
    for (std::size_t v = 0; v < videos_.size(); ++v) {
      const auto& vid = videos_[v];
      const Matrix& A = vid.out.attention;  // S x T
      Matrix d_embedded = A.transpose() * d_desc[v];                              // T x C
      const Matrix dA = d_desc[v] * vid.embedded.transpose();                     // S x T
      const Vector row_dot = (A.array() * dA.array()).rowwise().sum().matrix();  // S
      const Matrix d_logits = (A.array() * (dA.colwise() - row_dot).array()).matrix();
      g.d_saliency.noalias() += scale * d_logits * vid.embedded;
      d_embedded.noalias() += scale * d_logits.transpose() * sal_.queries;
      g.embedding.add_frames(d_embedded, *vid.frames);
    }
  }

 private:
  struct Video {
    const Matrix* frames;
    Matrix embedded;
    SaliencyOutput out;
  };

  void add_video(const EmbeddingParams& emb, const Matrix& frames) {
    Video v{&frames, emb.embed(frames), {}};
    v.out = multi_saliency(v.embedded, sal_);
    videos_.push_back(std::move(v));
  }

  const SaliencyParams& sal_;
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<Video> videos_;  // query first, then supports in episode order
  std::vector<Matrix> protos_;
  std::vector<std::vector<CosineGrad>> cos_;
};

// Hard-path DTW (otam-lite); class similarity is the mean over that class's supports.
class DtwPass {
 public:
  DtwPass(const EmbeddingParams& emb, const Episode& ep, bool normalize, const std::vector<AlignmentPath>* frozen)
      : ep_(ep), groups_(supports_by_label(ep)), normalize_(normalize) {
    query_ = emb.embed(ep.query.seq->frames);
    if (frozen && frozen->size() != ep.support.size()) {
      throw ShapeError("frozen paths: expected " + std::to_string(ep.support.size()) + ", got " +
                       std::to_string(frozen->size()));
    }
    for (std::size_t i = 0; i < ep.support.size(); ++i) {
      supports_.push_back(emb.embed(ep.support[i].seq->frames));
      const DistanceMatrix d = frame_distance_matrix(query_, supports_.back());
      if (frozen) {
        const AlignmentPath& p = (*frozen)[i];
        if (!p.admissible(static_cast<int>(d.rows()), static_cast<int>(d.cols()))) {
          throw ValidationError("frozen path " + std::to_string(i) + " is not admissible");
        }
        paths_.push_back(p);
      } else {
        paths_.push_back(dtw(d).path);
      }
      const double cost = paths_.back().cost(d);
      support_sims_.push_back(-cost / path_norm(i));
    }
  }

  Vector forward() const {
    Vector sims(static_cast<Eigen::Index>(groups_.size()));
    for (std::size_t k = 0; k < groups_.size(); ++k) {
      double sum = 0.0;
      for (std::size_t i : groups_[k]) sum += support_sims_[i];
      sims(static_cast<Eigen::Index>(k)) = sum / static_cast<double>(groups_[k].size());
    }
    return sims;
  }

  void backward(const Vector& dsims, EpisodeGrad& g) const {
    Matrix d_query = Matrix::Zero(query_.rows(), query_.cols());
    for (std::size_t k = 0; k < groups_.size(); ++k) {
      for (std::size_t i : groups_[k]) {
        // sim = -sum(1 - cos) / norm, so dsim/dcos = 1 / norm along the path.
        const double dcos = dsims(static_cast<Eigen::Index>(k)) / static_cast<double>(groups_[k].size()) / path_norm(i);
        Matrix d_support = Matrix::Zero(supports_[i].rows(), supports_[i].cols());
        for (const auto& [a, b] : paths_[i].steps) {
          const CosineGrad c = cosine_with_grad(query_.row(a).transpose(), supports_[i].row(b).transpose());
          d_query.row(a) += dcos * c.d_a.transpose();
          d_support.row(b) += dcos * c.d_b.transpose();
        }
        g.embedding.add_frames(d_support, ep_.support[i].seq->frames);
      }
    }
    g.embedding.add_frames(d_query, ep_.query.seq->frames);
  }

  const std::vector<AlignmentPath>& paths() const { return paths_; }

 private:
  double path_norm(std::size_t i) const {
    return normalize_ ? static_cast<double>(paths_[i].steps.size()) : 1.0;
  }

  const Episode& ep_;
  std::vector<std::vector<std::size_t>> groups_;
  bool normalize_;
  Matrix query_;
  std::vector<Matrix> supports_;
  std::vector<AlignmentPath> paths_;
  std::vector<double> support_sims_;
};

template <typename Pass>
void finish(Pass& pass, const Vector& sims, const Episode& ep, double temperature, EpisodeGrad& g) {
  const XentResult x = softmax_xent(temperature * sims, ep.query.label);
  g.loss = x.loss;
  g.similarities = sims;
  pass.backward(temperature * x.dlogits, g);
}

std::string join_ids(const std::vector<int>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? ", " : "") << ids[i];
  return os.str();
}

Matrix pooled_inputs(const Dataset& data, const std::vector<std::size_t>& video_indices) {
  Matrix out(static_cast<Eigen::Index>(video_indices.size()), data.manifest.feature_dim);
  for (std::size_t r = 0; r < video_indices.size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = mean_pool(data.videos[video_indices[r]].frames).transpose();
  }
  return out;
}

bool can_validate(const SplitIndex& val, const MethodConfig& cfg) {
  if (cfg.val_episodes <= 0 || val.class_ids.size() < static_cast<std::size_t>(cfg.n_way)) return false;
  for (const auto& v : val.videos_by_class) {
    if (v.size() < static_cast<std::size_t>(cfg.k_shot) + 1) return false;
  }
  return true;
}

// Tracks the best checkpoint by validation accuracy and decides early stopping.
class Selector {
 public:
  Selector(const Dataset& data, const MethodConfig& cfg)
      : data_(data), cfg_(cfg), val_(SplitIndex::build(data, Split::val)), enabled_(can_validate(val_, cfg)) {}

  /// Returns true when training should stop.
  bool observe(const TrainedModel& current) {
    if (!enabled_) {
      best_ = current;
      best_->val_accuracy = std::numeric_limits<double>::quiet_NaN();
      return false;
    }
    const double acc = episode_accuracy(current, data_, val_, cfg_, cfg_.val_episodes, cfg_.seed, kValStreams);
    // Ties go to the later checkpoint; only strict improvement resets patience.
    const bool improved = !best_ || acc > best_->val_accuracy;
    if (!best_ || acc >= best_->val_accuracy) {
      best_ = current;
      best_->val_accuracy = acc;
    }
    stale_ = improved ? 0 : stale_ + 1;
    return cfg_.patience > 0 && stale_ >= cfg_.patience;
  }

  TrainedModel take(std::vector<double> losses) {
    best_->epoch_losses = std::move(losses);
    return std::move(*best_);
  }

 private:
  const Dataset& data_;
  const MethodConfig& cfg_;
  SplitIndex val_;
  bool enabled_;
  std::optional<TrainedModel> best_;
  int stale_ = 0;
};

struct ClassifierFit {
  EmbeddingParams embedding;
  LinearHead head;
};

}  // namespace

ClassificationGrad classification_loss_grad(const EmbeddingParams& emb, const LinearHead& head,
                                            const Matrix& pooled_inputs, std::span<const int> labels,
                                            const Matrix& masks) {
  const Eigen::Index n = pooled_inputs.rows();
  if (static_cast<std::size_t>(n) != labels.size()) throw ShapeError("classification: inputs/labels count mismatch");
  if (masks.size() != 0 && (masks.rows() != n || masks.cols() != emb.W.rows())) {
    throw ShapeError("classification: dropout masks must be " + std::to_string(n) + "x" +
                     std::to_string(emb.W.rows()));
  }
  const Matrix hidden = (pooled_inputs * emb.W.transpose()).rowwise() + emb.b.transpose();
  const Matrix dropped = masks.size() ? Matrix(hidden.cwiseProduct(masks)) : hidden;
  const Matrix logits = (dropped * head.W.transpose()).rowwise() + head.b.transpose();
  ClassificationGrad g{0.0, EmbeddingGrad::zeros_like(emb), Matrix(), Vector()};
  Matrix d_logits(logits.rows(), logits.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const XentResult x = softmax_xent(logits.row(i).transpose(), labels[static_cast<std::size_t>(i)]);
    g.loss += x.loss * inv_n;
    d_logits.row(i) = x.dlogits.transpose() * inv_n;
  }
  g.dW_head = d_logits.transpose() * dropped;
  g.db_head = d_logits.colwise().sum().transpose();
  Matrix d_hidden = d_logits * head.W;
  if (masks.size()) d_hidden = d_hidden.cwiseProduct(masks);
  g.embedding.dW = d_hidden.transpose() * pooled_inputs;
  g.embedding.db = d_hidden.colwise().sum().transpose();
  return g;
}

EpisodeGrad episode_loss_grad(Method method, const EmbeddingParams& emb, const SaliencyParams* saliency,
                              const Episode& episode, double temperature, bool dtw_normalize,
                              const std::vector<AlignmentPath>* frozen_paths) {
  EpisodeGrad g{0.0, Vector(), EmbeddingGrad::zeros_like(emb), Matrix(), {}};
  switch (method) {
    case Method::meta_baseline: {
      MeanPoolPass pass(emb, episode);
      finish(pass, pass.forward(), episode, temperature, g);
      break;
    }
    case Method::cmn_lite: {
      if (saliency == nullptr) throw ValidationError("cmn-lite needs saliency parameters");
      g.d_saliency = Matrix::Zero(saliency->queries.rows(), saliency->queries.cols());
      SaliencyPass pass(emb, *saliency, episode);
      finish(pass, pass.forward(), episode, temperature, g);
      break;
    }
    case Method::otam_lite: {
      DtwPass pass(emb, episode, dtw_normalize, frozen_paths);
      finish(pass, pass.forward(), episode, temperature, g);
      g.paths = pass.paths();
      break;
    }
    default:
      throw ValidationError(std::string(to_string(method)) + " has no episodic loss");
  }
  return g;
}

Vector class_similarities(const TrainedModel& model, const Episode& episode, const MethodConfig& cfg) {
  switch (model.config.method) {
    case Method::meta_baseline: return MeanPoolPass(model.embedding, episode).forward();
    case Method::cmn_lite: {
      if (!model.saliency) throw ValidationError("cmn-lite model has no saliency parameters");
      return SaliencyPass(model.embedding, *model.saliency, episode).forward();
    }
    case Method::otam_lite: return DtwPass(model.embedding, episode, cfg.dtw_normalize, nullptr).forward();
    default:
      throw ValidationError(std::string(to_string(model.config.method)) + " is not a metric method");
  }
}

EmbeddingParams initial_embedding(const MethodConfig& cfg, int in_dim) {
  RngStream rng(cfg.seed, kInitStream);
  return EmbeddingParams::random(cfg.embed_dim, in_dim, rng);
}

namespace {

// Joint Adam training of embedding + linear head on mean-pooled inputs.
// `after_epoch` returns true to stop early.
template <typename AfterEpoch>
void fit_classifier(ClassifierFit& fit, const Matrix& inputs, const std::vector<int>& labels, double lr,
                    double dropout_p, int epochs, int batch_size, RngStream& rng, std::vector<double>& losses,
                    AfterEpoch after_epoch) {
  Matrix eb(fit.embedding.b);
  Matrix hb(fit.head.b);
  const std::array<const Matrix*, 4> shapes{&fit.embedding.W, &eb, &fit.head.W, &hb};
  AdamState adam(AdamConfig{lr}, shapes);
  const std::array<Matrix*, 4> params{&fit.embedding.W, &eb, &fit.head.W, &hb};
  const auto n = static_cast<std::size_t>(inputs.rows());
  const Eigen::Index dim = fit.embedding.W.rows();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto order = rng.sample_without_replacement(n, n);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(batch_size));
      const auto rows = static_cast<Eigen::Index>(stop - start);
      Matrix batch(rows, inputs.cols());
      std::vector<int> batch_labels(stop - start);
      Matrix masks;
      if (dropout_p > 0.0) masks.resize(rows, dim);
      for (std::size_t r = start; r < stop; ++r) {
        const auto i = static_cast<Eigen::Index>(r - start);
        batch.row(i) = inputs.row(static_cast<Eigen::Index>(order[r]));
        batch_labels[r - start] = labels[order[r]];
        if (dropout_p > 0.0) masks.row(i) = dropout_mask(rng, dropout_p, dim).transpose();
      }
      fit.embedding.b = eb;
      fit.head.b = hb;
      ClassificationGrad g = classification_loss_grad(fit.embedding, fit.head, batch, batch_labels, masks);
      loss_sum += g.loss * static_cast<double>(rows);
      const std::array<Matrix, 4> grads{std::move(g.embedding.dW), Matrix(g.embedding.db), std::move(g.dW_head),
                                        Matrix(g.db_head)};
      adam.step(params, grads);
    }
    fit.embedding.b = eb;
    fit.head.b = hb;
    losses.push_back(loss_sum / static_cast<double>(n));
    if (after_epoch()) break;
  }
}

std::vector<int> all_video_labels(const SplitIndex& split, std::vector<std::size_t>& videos) {
  std::vector<int> labels;
  for (std::size_t c = 0; c < split.class_ids.size(); ++c) {
    for (std::size_t v : split.videos_by_class[c]) {
      videos.push_back(v);
      labels.push_back(static_cast<int>(c));
    }
  }
  return labels;
}

}  // namespace

EmbeddingParams pretrain_embedding(const Dataset& pretrain, const Manifest& benchmark, const MethodConfig& cfg) {
  const auto pre_ids = pretrain.manifest.class_ids(Split::train);
  std::set<int> bench_ids;
  for (int id : benchmark.all_class_ids()) bench_ids.insert(id);
  std::vector<int> leaked;
  for (int id : pretrain.manifest.all_class_ids()) {
    if (bench_ids.contains(id)) leaked.push_back(id);
  }
  if (!leaked.empty()) {
    throw LeakageError("pretraining classes overlap the benchmark: " + join_ids(leaked));
  }
  EmbeddingParams init = initial_embedding(cfg, pretrain.manifest.feature_dim);
  // Every pretraining video is used regardless of its split tag.
  std::vector<std::size_t> videos;
  std::vector<int> labels;
  std::map<int, int> label_of;
  for (std::size_t i = 0; i < pretrain.manifest.videos.size(); ++i) {
    const int id = pretrain.manifest.videos[i].class_id;
    const auto [it, _] = label_of.emplace(id, static_cast<int>(label_of.size()));
    videos.push_back(i);
    labels.push_back(it->second);
  }
  if (videos.empty() || cfg.pretrain_epochs == 0) return init;
  RngStream rng(cfg.seed, kPretrainStream);
  ClassifierFit fit{init, LinearHead::random(static_cast<int>(label_of.size()), cfg.embed_dim, rng)};
  std::vector<double> losses;
  fit_classifier(fit, pooled_inputs(pretrain, videos), labels, 1e-3, 0.0, cfg.pretrain_epochs, cfg.batch_size, rng,
                 losses, [] { return false; });
  return fit.embedding;
}

TrainedModel train_classification(const Dataset& data, const MethodConfig& cfg, const EmbeddingParams& init) {
  cfg.validate();
  if (!is_classifier_based(cfg.method)) {
    throw ValidationError(std::string(to_string(cfg.method)) + " is not trained by classification");
  }
  const SplitIndex train = SplitIndex::build(data, Split::train);
  if (train.class_ids.empty()) throw CapacityError("train split is empty");
  std::vector<std::size_t> videos;
  const std::vector<int> labels = all_video_labels(train, videos);
  const Matrix inputs = pooled_inputs(data, videos);

  RngStream rng(cfg.seed, kTrainStream);
  ClassifierFit fit{init, LinearHead::random(static_cast<int>(train.class_ids.size()), cfg.embed_dim, rng)};
  Selector selector(data, cfg);
  std::vector<double> losses;
  TrainedModel current{cfg, fit.embedding, fit.head, std::nullopt, 0.0, {}};
  fit_classifier(fit, inputs, labels, cfg.base_lr(), cfg.train_dropout(), cfg.epochs, cfg.batch_size, rng, losses,
                 [&] {
                   current.embedding = fit.embedding;
                   current.base_head = fit.head;
                   return selector.observe(current);
                 });
  if (losses.empty()) selector.observe(current);
  return selector.take(std::move(losses));
}

TrainedModel meta_train(const Dataset& data, const MethodConfig& cfg, const EmbeddingParams& init) {
  cfg.validate();
  if (is_classifier_based(cfg.method)) {
    throw ValidationError(std::string(to_string(cfg.method)) + " is not trained episodically");
  }
  const SplitIndex train = SplitIndex::build(data, Split::train);
  if (train.class_ids.size() < static_cast<std::size_t>(cfg.n_way)) {
    throw CapacityError("train split has " + std::to_string(train.class_ids.size()) + " classes, " +
                        std::to_string(cfg.n_way) + "-way meta-training needs " + std::to_string(cfg.n_way));
  }
  TrainedModel model{cfg, init, std::nullopt, std::nullopt, 0.0, {}};
  if (cfg.method == Method::cmn_lite) model.saliency = SaliencyParams::zeros(cfg.saliency_heads, cfg.embed_dim);

  Matrix eb(model.embedding.b);
  std::vector<const Matrix*> shapes{&model.embedding.W, &eb};
  std::vector<Matrix*> params{&model.embedding.W, &eb};
  if (model.saliency) {
    shapes.push_back(&model.saliency->queries);
    params.push_back(&model.saliency->queries);
  }
  AdamState adam(AdamConfig{cfg.base_lr()}, shapes);
  RngStream rng(cfg.seed, kTrainStream);
  Selector selector(data, cfg);
  std::vector<double> losses;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (int e = 0; e < cfg.episodes_per_epoch; ++e) {
      const Episode ep = sample_episode(data, train, cfg.n_way, cfg.k_shot, rng);
      EpisodeGrad g = episode_loss_grad(cfg.method, model.embedding, model.saliency ? &*model.saliency : nullptr, ep,
                                        cfg.temperature, cfg.dtw_normalize);
      loss_sum += g.loss;
      std::vector<Matrix> grads{std::move(g.embedding.dW), Matrix(g.embedding.db)};
      if (model.saliency) grads.push_back(std::move(g.d_saliency));
      adam.step(params, grads);
      model.embedding.b = eb;
    }
    losses.push_back(loss_sum / cfg.episodes_per_epoch);
    if (selector.observe(model)) break;
  }
  if (losses.empty()) selector.observe(model);
  return selector.take(std::move(losses));
}

TrainedModel train_model(const Dataset& data, const MethodConfig& cfg, const Dataset* pretrain) {
  cfg.validate();
  EmbeddingParams init = initial_embedding(cfg, data.manifest.feature_dim);
  if (cfg.init == InitMode::pretrained) {
    if (pretrain == nullptr) throw ValidationError("init=pretrained needs a pretraining dataset");
    if (pretrain->manifest.feature_dim != data.manifest.feature_dim) {
      throw ShapeError("pretraining feature_dim differs from the benchmark");
    }
    init = pretrain_embedding(*pretrain, data.manifest, cfg);
  }
  return is_classifier_based(cfg.method) ? train_classification(data, cfg, init) : meta_train(data, cfg, init);
}

int adapt_and_predict(const TrainedModel& model, const Episode& episode, const MethodConfig& cfg, RngStream& rng) {
  const HeadTrainConfig head_cfg{cfg.iters_adapt, cfg.lr_adapt, 0.0};
  switch (model.config.method) {
    case Method::baseline: {
      const auto n = static_cast<Eigen::Index>(episode.support.size());
      Matrix features(n, model.embedding.W.rows());
      std::vector<int> labels;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = episode.support[static_cast<std::size_t>(i)];
        features.row(i) = model.embedding.embed_vector(mean_pool(s.seq->frames)).transpose();
        labels.push_back(s.label);
      }
      LinearHead init = LinearHead::random(episode.n_way, static_cast<int>(model.embedding.W.rows()), rng);
      const LinearHead head = train_head(features, labels, std::move(init), head_cfg, rng);
      return argmax(linear_forward(head, model.embedding.embed_vector(mean_pool(episode.query.seq->frames))));
    }
    case Method::baseline_plus: {
      if (!model.base_head) throw ValidationError("baseline-plus model has no base head");
      const auto logits_of = [&](const FeatureSequence& seq) {
        return linear_forward(*model.base_head, model.embedding.embed_vector(mean_pool(seq.frames)));
      };
      std::vector<LabelledVector> support;
      Matrix features(static_cast<Eigen::Index>(episode.support.size()), model.base_head->W.rows());
      std::vector<int> labels;
      for (std::size_t i = 0; i < episode.support.size(); ++i) {
        support.push_back({logits_of(*episode.support[i].seq), episode.support[i].label});
        features.row(static_cast<Eigen::Index>(i)) = support.back().value.transpose();
        labels.push_back(episode.support[i].label);
      }
      LinearHead head = imprint(support, episode.n_way);
      head = train_head(features, labels, std::move(head), head_cfg, rng);
      return argmax(linear_forward(head, logits_of(*episode.query.seq)));
    }
    default:
      return argmax(class_similarities(model, episode, cfg));
  }
}

double episode_accuracy(const TrainedModel& model, const Dataset& data, const SplitIndex& split,
                        const MethodConfig& cfg, int count, std::uint64_t seed, std::uint64_t stream_base) {
  if (count <= 0) return 0.0;
  int correct = 0;
  for (int e = 0; e < count; ++e) {
    RngStream rng(seed, stream_base + static_cast<std::uint64_t>(e));
    const Episode ep = sample_episode(data, split, cfg.n_way, cfg.k_shot, rng);
    correct += adapt_and_predict(model, ep, cfg, rng) == ep.query.label ? 1 : 0;
  }
  return static_cast<double>(correct) / count;
}

}  // namespace fsvc
