#include "fsvc/protocols.hpp"

#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "fsvc/error.hpp"

namespace fsvc {

EmbeddingParams EmbeddingParams::random(int out_dim, int in_dim, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  EmbeddingParams p{Matrix(out_dim, in_dim), Vector(out_dim)};
  for (int r = 0; r < out_dim; ++r) {
    for (int c = 0; c < in_dim; ++c) p.W(r, c) = rng.uniform(-bound, bound);
  }
  for (int r = 0; r < out_dim; ++r) p.b(r) = rng.uniform(-bound, bound);
  return p;
}

Matrix EmbeddingParams::embed(const Matrix& frames) const {
  if (frames.cols() != W.cols()) {
    throw ShapeError("embed: frames have dim " + std::to_string(frames.cols()) + ", embedding expects " +
                     std::to_string(W.cols()));
  }
  return (frames * W.transpose()).rowwise() + b.transpose();
}

EmbeddingGrad EmbeddingGrad::zeros_like(const EmbeddingParams& p) {
  return {Matrix::Zero(p.W.rows(), p.W.cols()), Vector::Zero(p.b.size())};
}

void EmbeddingGrad::add_frames(const Matrix& d_embedded, const Matrix& frames) {
  dW.noalias() += d_embedded.transpose() * frames;
  db += d_embedded.colwise().sum().transpose();
}

void EmbeddingGrad::add_vector(const Eigen::Ref<const Vector>& d_embedded, const Eigen::Ref<const Vector>& x) {
  dW.noalias() += d_embedded * x.transpose();
  db += d_embedded;
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::meta_baseline: return "meta-baseline";
    case Method::cmn_lite: return "cmn-lite";
    case Method::otam_lite: return "otam-lite";
    case Method::baseline: return "baseline";
    case Method::baseline_plus: return "baseline-plus";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::meta_baseline, Method::cmn_lite, Method::otam_lite, Method::baseline, Method::baseline_plus}) {
    if (name == to_string(m)) return m;
  }
  throw ValidationError("unknown method '" + std::string(name) +
                        "' (expected meta-baseline, cmn-lite, otam-lite, baseline or baseline-plus)");
}

bool is_classifier_based(Method m) { return m == Method::baseline || m == Method::baseline_plus; }

std::string_view to_string(InitMode m) { return m == InitMode::scratch ? "scratch" : "pretrained"; }

InitMode parse_init(std::string_view name) {
  if (name == "scratch") return InitMode::scratch;
  if (name == "pretrained") return InitMode::pretrained;
  throw ValidationError("unknown init '" + std::string(name) + "' (expected scratch or pretrained)");
}

double MethodConfig::base_lr() const {
  if (lr_base) return *lr_base;
  if (init == InitMode::scratch) return 1e-3;
  return is_classifier_based(method) ? 1e-4 : 1e-5;
}

void MethodConfig::validate() const {
  if (n_way < 2) throw ValidationError("n_way must be >= 2");
  if (k_shot < 1) throw ValidationError("k_shot must be >= 1");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
  if (!(base_lr() > 0.0) || !(lr_adapt > 0.0)) throw ValidationError("learning rates must be > 0");
  if (iters_adapt < 0) throw ValidationError("iters_adapt must be >= 0");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ValidationError("dropout_p must be in [0, 1)");
  if (embed_dim < 1 || saliency_heads < 1) throw ValidationError("embed_dim and saliency_heads must be >= 1");
  if (batch_size < 1 || epochs < 0 || episodes_per_epoch < 1 || val_episodes < 0 || patience < 0 ||
      pretrain_epochs < 0) {
    throw ValidationError("invalid training schedule");
  }
}

std::string MethodConfig::to_json() const {
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(method));
  j["n_way"] = n_way;
  j["k_shot"] = k_shot;
  j["temperature"] = temperature;
  j["lr_base"] = base_lr();
  j["lr_adapt"] = lr_adapt;
  j["iters_adapt"] = iters_adapt;
  j["dropout_p"] = dropout_p;
  j["init"] = std::string(to_string(init));
  j["seed"] = seed;
  j["embed_dim"] = embed_dim;
  j["saliency_heads"] = saliency_heads;
  j["dtw_normalize"] = dtw_normalize;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["episodes_per_epoch"] = episodes_per_epoch;
  j["val_episodes"] = val_episodes;
  j["patience"] = patience;
  j["pretrain_epochs"] = pretrain_epochs;
  return j.dump();
}

MethodConfig MethodConfig::from_json(std::string_view text) {
  MethodConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.method = parse_method(j.at("method").get<std::string>());
    c.n_way = j.at("n_way").get<int>();
    c.k_shot = j.at("k_shot").get<int>();
    c.temperature = j.at("temperature").get<double>();
    c.lr_base = j.at("lr_base").get<double>();
    c.lr_adapt = j.at("lr_adapt").get<double>();
    c.iters_adapt = j.at("iters_adapt").get<int>();
    c.dropout_p = j.at("dropout_p").get<double>();
    c.init = parse_init(j.at("init").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.embed_dim = j.at("embed_dim").get<int>();
    c.saliency_heads = j.at("saliency_heads").get<int>();
    c.dtw_normalize = j.at("dtw_normalize").get<bool>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.episodes_per_epoch = j.at("episodes_per_epoch").get<int>();
    c.val_episodes = j.at("val_episodes").get<int>();
    c.patience = j.at("patience").get<int>();
    c.pretrain_epochs = j.at("pretrain_epochs").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("method config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string MethodConfig::fingerprint() const {
  const std::string text = to_json();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));
  return buf;
}

void TrainedModel::validate() const {
  const bool wants_head = is_classifier_based(config.method);
  const bool wants_saliency = config.method == Method::cmn_lite;
  if (base_head.has_value() != wants_head) {
    throw ValidationError(std::string("model for ") + std::string(to_string(config.method)) +
                          (wants_head ? " is missing its base head" : " must not carry a base head"));
  }
  if (saliency.has_value() != wants_saliency) {
    throw ValidationError(std::string("model for ") + std::string(to_string(config.method)) +
                          (wants_saliency ? " is missing saliency queries" : " must not carry saliency queries"));
  }
  if (embedding.W.rows() < 1 || embedding.W.cols() < 1 || embedding.b.size() != embedding.W.rows()) {
    throw ShapeError("embedding shapes disagree");
  }
  if (base_head && (base_head->W.cols() != embedding.W.rows() || base_head->b.size() != base_head->W.rows())) {
    throw ShapeError("base head does not match embedding dim");
  }
  if (saliency && saliency->queries.cols() != embedding.W.rows()) {
    throw ShapeError("saliency queries do not match embedding dim");
  }
}

std::uint64_t TrainedModel::weights_fingerprint() const {
  std::uint64_t h = fnv1a64(embedding.W.data(), sizeof(double) * static_cast<std::size_t>(embedding.W.size()));
  h = fnv1a64(embedding.b.data(), sizeof(double) * static_cast<std::size_t>(embedding.b.size()), h);
  if (base_head) {
    h = fnv1a64(base_head->W.data(), sizeof(double) * static_cast<std::size_t>(base_head->W.size()), h);
    h = fnv1a64(base_head->b.data(), sizeof(double) * static_cast<std::size_t>(base_head->b.size()), h);
  }
  if (saliency) {
    h = fnv1a64(saliency->queries.data(), sizeof(double) * static_cast<std::size_t>(saliency->queries.size()), h);
  }
  return h;
}

}  // namespace fsvc
