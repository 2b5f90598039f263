#include "fsvc/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "fsvc/error.hpp"

namespace fsvc {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPrototypeStreams = 1ULL << 40;
constexpr std::uint64_t kVideoStreams = 2ULL << 40;
constexpr std::uint64_t kBasisStream = 3ULL << 40;

std::string numbered(const char* prefix, int n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06d", prefix, n);
  return buf;
}

}  // namespace

void GeneratorSpec::validate() const {
  if (train_classes < 0 || val_classes < 0 || test_classes < 0 || pretrain_classes < 0) {
    throw ValidationError("class counts must be non-negative");
  }
  if (videos_per_class < 1) throw ValidationError("videos_per_class must be >= 1");
  if (feature_dim < 1 || frame_count < 1) throw ValidationError("feature_dim and frame_count must be >= 1");
  if (prototype_length < frame_count) throw ValidationError("prototype_length must be >= frame_count");
  if (!(noise_sigma >= 0.0)) throw ValidationError("noise_sigma must be >= 0");
  if (!(warp_strength >= 0.0 && warp_strength <= 1.0)) throw ValidationError("warp_strength must be in [0, 1]");
  if (signal_rank < 0 || signal_rank > feature_dim) throw ValidationError("signal_rank must be in [0, feature_dim]");
}

GeneratorSpec load_generator_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open generator spec '" + path.string() + "'");
  GeneratorSpec s;
  try {
    const auto j = nlohmann::json::parse(in);
    s.train_classes = j.value("train_classes", s.train_classes);
    s.val_classes = j.value("val_classes", s.val_classes);
    s.test_classes = j.value("test_classes", s.test_classes);
    s.videos_per_class = j.value("videos_per_class", s.videos_per_class);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.frame_count = j.value("frame_count", s.frame_count);
    s.prototype_length = j.value("prototype_length", s.prototype_length);
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    s.warp_strength = j.value("warp_strength", s.warp_strength);
    s.seed = j.value("seed", s.seed);
    s.pretrain_classes = j.value("pretrain_classes", s.pretrain_classes);
    s.signal_rank = j.value("signal_rank", s.signal_rank);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("generator spec '" + path.string() + "': " + e.what());
  }
  s.validate();
  return s;
}

void save_generator_spec(const GeneratorSpec& s, const fs::path& path) {
  nlohmann::ordered_json j;
  j["train_classes"] = s.train_classes;
  j["val_classes"] = s.val_classes;
  j["test_classes"] = s.test_classes;
  j["videos_per_class"] = s.videos_per_class;
  j["feature_dim"] = s.feature_dim;
  j["frame_count"] = s.frame_count;
  j["prototype_length"] = s.prototype_length;
  j["noise_sigma"] = s.noise_sigma;
  j["warp_strength"] = s.warp_strength;
  j["seed"] = s.seed;
  j["pretrain_classes"] = s.pretrain_classes;
  j["signal_rank"] = s.signal_rank;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

namespace {

Matrix random_walk(RngStream& rng, Eigen::Index cols, int length) {
  Matrix walk(length, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (int t = 0; t < length; ++t) {
      acc += rng.normal();
      walk(t, c) = acc;
    }
  }
  return walk;
}

void standardize_columns(Matrix& traj) {
  if (traj.rows() == 1) return;
  for (Eigen::Index c = 0; c < traj.cols(); ++c) {
    auto col = traj.col(c);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(traj.rows()));
    if (sd > 0.0) col /= sd;
  }
}

}  // namespace

Matrix gen_class_prototype(RngStream& rng, int feature_dim, int length) {
  if (feature_dim < 1 || length < 1) throw ValidationError("prototype needs feature_dim >= 1 and length >= 1");
  Matrix traj = random_walk(rng, feature_dim, length);
  standardize_columns(traj);
  return traj;
}

Matrix gen_signal_basis(RngStream& rng, int rank, int feature_dim) {
  if (rank < 1 || feature_dim < 1) throw ValidationError("signal basis needs rank >= 1 and feature_dim >= 1");
  Matrix basis(rank, feature_dim);
  for (int r = 0; r < rank; ++r)
    for (int c = 0; c < feature_dim; ++c) basis(r, c) = rng.normal();
  for (int c = 0; c < feature_dim; ++c) {
    const double n = basis.col(c).norm();
    if (n > 0.0) basis.col(c) /= n;
  }
  return basis;
}

Matrix gen_class_prototype(RngStream& rng, const Matrix& basis, int length) {
  if (basis.size() == 0 || length < 1) throw ValidationError("prototype needs a non-empty basis and length >= 1");
  // standardize the latent walk, not the output, so every class stays in rowspace(basis)
  Matrix latent = random_walk(rng, basis.rows(), length);
  standardize_columns(latent);
  return latent * basis;
}

std::vector<int> sample_warp_indices(RngStream& rng, int frame_count, int prototype_length, double warp_strength) {
  const int T = frame_count;
  const int L = prototype_length;
  std::vector<double> gaps(static_cast<std::size_t>(T) + 1);
  double total = 0.0;
  for (auto& g : gaps) {
    g = rng.exponential();
    total += g;
  }
  std::vector<int> idx(static_cast<std::size_t>(T));
  double cum = 0.0;
  for (int t = 0; t < T; ++t) {
    cum += gaps[static_cast<std::size_t>(t)];
    const double uniform_pos = T == 1 ? 0.5 : static_cast<double>(t) / (T - 1);
    const double random_pos = cum / total;
    const double pos = (1.0 - warp_strength) * uniform_pos + warp_strength * random_pos;
    int i = static_cast<int>(std::lround(pos * (L - 1)));
    // Leave room for the remaining frames and stay strictly above the previous one.
    i = std::min(i, L - T + t);
    if (t > 0) i = std::max(i, idx[static_cast<std::size_t>(t) - 1] + 1);
    idx[static_cast<std::size_t>(t)] = i;
  }
  return idx;
}

FeatureSequence gen_video(const Matrix& prototype, const GeneratorSpec& spec, RngStream& rng) {
  if (prototype.rows() != spec.prototype_length || prototype.cols() != spec.feature_dim) {
    throw ShapeError("prototype is " + std::to_string(prototype.rows()) + "x" + std::to_string(prototype.cols()) +
                     ", spec expects " + std::to_string(spec.prototype_length) + "x" +
                     std::to_string(spec.feature_dim));
  }
  const auto idx = sample_warp_indices(rng, spec.frame_count, spec.prototype_length, spec.warp_strength);
  FeatureSequence seq;
  seq.frames.resize(spec.frame_count, spec.feature_dim);
  for (int t = 0; t < spec.frame_count; ++t) {
    seq.frames.row(t) = prototype.row(idx[static_cast<std::size_t>(t)]);
  }
  if (spec.noise_sigma > 0.0) {
    for (int t = 0; t < spec.frame_count; ++t) {
      for (int c = 0; c < spec.feature_dim; ++c) seq.frames(t, c) += spec.noise_sigma * rng.normal();
    }
  }
  seq.frames = seq.frames.cast<float>().cast<double>();
  return seq;
}

namespace {

struct ClassPlan {
  int class_id;
  Split split;
};

Dataset build_dataset(const GeneratorSpec& spec, const std::vector<ClassPlan>& plan, const Matrix* basis,
                      int& video_counter, const char* prefix) {
  Dataset data;
  data.manifest.frame_count = spec.frame_count;
  data.manifest.feature_dim = spec.feature_dim;
  for (const auto& c : plan) {
    data.manifest.classes.push_back({c.class_id, numbered("class_", c.class_id)});
    RngStream proto_rng(spec.seed, kPrototypeStreams + static_cast<std::uint64_t>(c.class_id));
    const Matrix proto = basis ? gen_class_prototype(proto_rng, *basis, spec.prototype_length)
                               : gen_class_prototype(proto_rng, spec.feature_dim, spec.prototype_length);
    for (int v = 0; v < spec.videos_per_class; ++v) {
      const int n = video_counter++;
      RngStream video_rng(spec.seed, kVideoStreams + static_cast<std::uint64_t>(n));
      FeatureSequence seq = gen_video(proto, spec, video_rng);
      seq.video_id = numbered(prefix, n);
      seq.class_id = c.class_id;
      data.manifest.videos.push_back({seq.video_id, c.class_id, fs::path("videos") / (seq.video_id + ".fsvf"), c.split});
      data.videos.push_back(std::move(seq));
    }
  }
  return data;
}

}  // namespace

SyntheticBenchmark generate_benchmark(const GeneratorSpec& spec) {
  spec.validate();
  std::vector<ClassPlan> plan;
  int next_class = 0;
  for (int i = 0; i < spec.train_classes; ++i) plan.push_back({next_class++, Split::train});
  for (int i = 0; i < spec.val_classes; ++i) plan.push_back({next_class++, Split::val});
  for (int i = 0; i < spec.test_classes; ++i) plan.push_back({next_class++, Split::test});
  std::optional<Matrix> basis;
  if (spec.signal_rank > 0) {
    RngStream basis_rng(spec.seed, kBasisStream);
    basis = gen_signal_basis(basis_rng, spec.signal_rank, spec.feature_dim);
  }
  const Matrix* shared = basis ? &*basis : nullptr;
  int video_counter = 0;
  SyntheticBenchmark out;
  out.benchmark = build_dataset(spec, plan, shared, video_counter, "v");
  if (spec.pretrain_classes > 0) {
    std::vector<ClassPlan> pre;
    for (int i = 0; i < spec.pretrain_classes; ++i) pre.push_back({next_class++, Split::train});
    out.pretrain = build_dataset(spec, pre, shared, video_counter, "p");
  }
  return out;
}

namespace {

Manifest write_dataset(const Dataset& data, const fs::path& out_dir, const fs::path& manifest_name) {
  Manifest m = data.manifest;
  for (std::size_t i = 0; i < data.videos.size(); ++i) {
    const fs::path file = fs::absolute(out_dir / m.videos[i].file_path).lexically_normal();
    write_feature_file(data.videos[i], file);
    m.videos[i].file_path = file;
  }
  save_manifest(m, out_dir / manifest_name);
  return m;
}

}  // namespace

BenchmarkManifests gen_benchmark(const GeneratorSpec& spec, const fs::path& out_dir) {
  const SyntheticBenchmark synth = generate_benchmark(spec);
  std::error_code ec;
  fs::create_directories(out_dir / "videos", ec);
  if (ec) throw IoError("cannot create '" + (out_dir / "videos").string() + "': " + ec.message());
  BenchmarkManifests out;
  out.benchmark = write_dataset(synth.benchmark, out_dir, "manifest.json");
  if (synth.pretrain) out.pretrain = write_dataset(*synth.pretrain, out_dir, "pretrain_manifest.json");
  return out;
}

}  // namespace fsvc
