#include "fsvc/selftest.hpp"

#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "fsvc/align.hpp"
#include "fsvc/heads.hpp"
#include "fsvc/protocols.hpp"

namespace fsvc {

namespace {

Matrix random_matrix(RngStream& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Max over points of |analytic - numeric| / max(|analytic|, |numeric|) in L2 norm.
double fd_relative_error(Matrix& param, const Matrix& analytic, const std::function<double()>& loss) {
  constexpr double h = 1e-5;
  Matrix numeric(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double keep = param.data()[i];
    param.data()[i] = keep + h;
    const double up = loss();
    param.data()[i] = keep - h;
    const double down = loss();
    param.data()[i] = keep;
    numeric.data()[i] = (up - down) / (2.0 * h);
  }
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-12});
  return (analytic - numeric).norm() / scale;
}

struct ToyEpisode {
  std::vector<FeatureSequence> videos;
  Episode episode;
};

ToyEpisode toy_episode(RngStream& rng, int n_way, int k_shot, int frames, int dim) {
  ToyEpisode t;
  const int count = n_way * k_shot + 1;
  t.videos.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    t.videos.push_back({"toy" + std::to_string(i), i % n_way, random_matrix(rng, frames, dim)});
  }
  t.episode.n_way = n_way;
  t.episode.k_shot = k_shot;
  for (int k = 0; k < n_way; ++k) {
    t.episode.class_map.push_back(k);
    for (int j = 0; j < k_shot; ++j) t.episode.support.push_back({&t.videos[static_cast<std::size_t>(k * k_shot + j)], k});
  }
  t.episode.query = {&t.videos.back(), static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_way)))};
  return t;
}

SelftestCheck dtw_oracle_check(std::uint64_t seed) {
  RngStream rng(seed, 1);
  for (int c = 0; c < 1000; ++c) {
    const int rows = 2 + static_cast<int>(rng.uniform_index(3));
    const int cols = 2 + static_cast<int>(rng.uniform_index(3));
    Matrix d(rows, cols);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = rng.uniform(0.0, 2.0);
    const DtwResult r = dtw(d);
    const double brute = dtw_bruteforce(d);
    if (std::abs(r.cost - brute) > 1e-9 || !r.path.admissible(rows, cols) || std::abs(r.path.cost(d) - r.cost) > 1e-9) {
      std::ostringstream os;
      os << "case " << c << ": dp " << r.cost << " vs brute force " << brute;
      return {"dtw-oracle", false, os.str()};
    }
  }
  return {"dtw-oracle", true, "1000 random matrices agree"};
}

SelftestCheck classification_gradient_check(std::uint64_t seed) {
  RngStream rng(seed, 2);
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    EmbeddingParams emb{random_matrix(rng, 4, 6), random_matrix(rng, 4, 1).col(0)};
    LinearHead head{random_matrix(rng, 3, 4), random_matrix(rng, 3, 1).col(0)};
    const Matrix inputs = random_matrix(rng, 5, 6);
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) labels.push_back(static_cast<int>(rng.uniform_index(3)));
    Matrix masks(5, 4);
    for (int i = 0; i < 5; ++i) masks.row(i) = dropout_mask(rng, 0.5, 4).transpose();
    const ClassificationGrad g = classification_loss_grad(emb, head, inputs, labels, masks);
    const auto loss = [&] { return classification_loss_grad(emb, head, inputs, labels, masks).loss; };
    worst = std::max(worst, fd_relative_error(emb.W, g.embedding.dW, loss));
    worst = std::max(worst, fd_relative_error(head.W, g.dW_head, loss));
  }
  return {"gradient-classification", worst < 1e-4, "max relative error " + std::to_string(worst)};
}

SelftestCheck episodic_gradient_check(Method method, std::uint64_t seed) {
  RngStream rng(seed, 3 + static_cast<std::uint64_t>(method));
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    ToyEpisode toy = toy_episode(rng, 3, 2, 4, 6);
    EmbeddingParams emb{random_matrix(rng, 5, 6), random_matrix(rng, 5, 1).col(0)};
    SaliencyParams sal{random_matrix(rng, 2, 5)};
    const EpisodeGrad g = episode_loss_grad(method, emb, &sal, toy.episode, 3.0, false);
    const std::vector<AlignmentPath> frozen = g.paths;
    const auto* paths = method == Method::otam_lite ? &frozen : nullptr;
    const auto loss = [&] { return episode_loss_grad(method, emb, &sal, toy.episode, 3.0, false, paths).loss; };
    worst = std::max(worst, fd_relative_error(emb.W, g.embedding.dW, loss));
    if (method == Method::cmn_lite) worst = std::max(worst, fd_relative_error(sal.queries, g.d_saliency, loss));
  }
  return {"gradient-" + std::string(to_string(method)), worst < 1e-4, "max relative error " + std::to_string(worst)};
}

SelftestCheck imprint_argmax_check(std::uint64_t seed) {
  RngStream rng(seed, 10);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_way = 5;
    std::vector<LabelledVector> support;
    for (int k = 0; k < n_way; ++k) support.push_back({random_matrix(rng, 12, 1).col(0), k});
    const LinearHead head = imprint(support, n_way);
    const Vector query = random_matrix(rng, 12, 1).col(0);
    const int by_head = argmax(linear_forward(head, query));
    Vector cos(n_way);
    for (int k = 0; k < n_way; ++k) cos(k) = cosine(support[static_cast<std::size_t>(k)].value, query);
    if (by_head != argmax(cos)) {
      return {"imprint-argmax", false, "trial " + std::to_string(trial) + " disagrees"};
    }
  }
  return {"imprint-argmax", true, "1000 random episodes agree"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest(std::uint64_t seed) {
  return {
      dtw_oracle_check(seed),
      classification_gradient_check(seed),
      episodic_gradient_check(Method::meta_baseline, seed),
      episodic_gradient_check(Method::cmn_lite, seed),
      episodic_gradient_check(Method::otam_lite, seed),
      imprint_argmax_check(seed),
  };
}

int report_selftest(const std::vector<SelftestCheck>& checks, std::ostream& out) {
  int status = 0;
  for (const auto& c : checks) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    if (!c.passed && status == 0) {
      out << "first failed property: " << c.name << '\n';
      status = 1;
    }
  }
  return status;
}

}  // namespace fsvc
