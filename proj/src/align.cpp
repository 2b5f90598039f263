#include "fsvc/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsvc/error.hpp"

namespace fsvc {

Vector mean_pool(const Matrix& seq) {
  if (seq.rows() < 1) throw ShapeError("mean_pool needs at least one frame");
  return seq.colwise().mean().transpose();
}

double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine of a zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

CosineGrad cosine_with_grad(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine: sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine of a zero-norm vector");
  const double c = a.dot(b) / (na * nb);
  CosineGrad g{c, b / (na * nb) - (c / (na * na)) * a, a / (na * nb) - (c / (nb * nb)) * b};
  return g;
}

DistanceMatrix frame_distance_matrix(const Matrix& query, const Matrix& support) {
  if (query.cols() != support.cols()) {
    throw ShapeError("frame_distance_matrix: feature dims " + std::to_string(query.cols()) + " and " +
                     std::to_string(support.cols()));
  }
  const Vector qn = query.rowwise().norm();
  const Vector sn = support.rowwise().norm();
  for (Eigen::Index i = 0; i < qn.size(); ++i) {
    if (qn(i) == 0.0) throw DegenerateInputError("zero-norm frame in query sequence at index " + std::to_string(i));
  }
  for (Eigen::Index j = 0; j < sn.size(); ++j) {
    if (sn(j) == 0.0) throw DegenerateInputError("zero-norm frame in support sequence at index " + std::to_string(j));
  }
  Matrix cos = (query * support.transpose()).array() / (qn * sn.transpose()).array();
  return (1.0 - cos.array().min(1.0).max(-1.0)).matrix();
}

bool AlignmentPath::admissible(int rows, int cols) const {
  if (steps.empty() || steps.front() != std::pair{0, 0} || steps.back() != std::pair{rows - 1, cols - 1}) {
    return false;
  }
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const int di = steps[k].first - steps[k - 1].first;
    const int dj = steps[k].second - steps[k - 1].second;
    if (di < 0 || di > 1 || dj < 0 || dj > 1 || (di == 0 && dj == 0)) return false;
  }
  return true;
}

double AlignmentPath::cost(const DistanceMatrix& d) const {
  double sum = 0.0;
  for (const auto& [i, j] : steps) sum += d(i, j);
  return sum;
}

DtwResult dtw(const DistanceMatrix& d) {
  const auto rows = static_cast<int>(d.rows());
  const auto cols = static_cast<int>(d.cols());
  if (rows < 1 || cols < 1) throw ShapeError("dtw needs a non-empty distance matrix");
  Matrix acc(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      double best;
      if (i == 0 && j == 0) {
        best = 0.0;
      } else if (i == 0) {
        best = acc(0, j - 1);
      } else if (j == 0) {
        best = acc(i - 1, 0);
      } else {
        best = std::min({acc(i - 1, j - 1), acc(i - 1, j), acc(i, j - 1)});
      }
      acc(i, j) = d(i, j) + best;
    }
  }
  DtwResult out{acc(rows - 1, cols - 1), {}};
  int i = rows - 1;
  int j = cols - 1;
  out.path.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = acc(i - 1, j - 1);
      const double up = acc(i - 1, j);
      const double left = acc(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    out.path.steps.emplace_back(i, j);
  }
  std::reverse(out.path.steps.begin(), out.path.steps.end());
  return out;
}

namespace {

double enumerate_paths(const DistanceMatrix& d, int i, int j) {
  const double here = d(i, j);
  const int last_i = static_cast<int>(d.rows()) - 1;
  const int last_j = static_cast<int>(d.cols()) - 1;
  if (i == last_i && j == last_j) return here;
  double best = std::numeric_limits<double>::infinity();
  if (i < last_i) best = std::min(best, enumerate_paths(d, i + 1, j));
  if (j < last_j) best = std::min(best, enumerate_paths(d, i, j + 1));
  if (i < last_i && j < last_j) best = std::min(best, enumerate_paths(d, i + 1, j + 1));
  return here + best;
}

}  // namespace

double dtw_bruteforce(const DistanceMatrix& d) {
  if (d.rows() < 1 || d.cols() < 1) throw ShapeError("dtw_bruteforce needs a non-empty distance matrix");
  if (d.rows() > kBruteforceMaxSide || d.cols() > kBruteforceMaxSide) {
    throw CapacityError("dtw_bruteforce limited to " + std::to_string(kBruteforceMaxSide) + "x" +
                        std::to_string(kBruteforceMaxSide) + ", got " + std::to_string(d.rows()) + "x" +
                        std::to_string(d.cols()));
  }
  return enumerate_paths(d, 0, 0);
}

double otam_similarity(const Matrix& query, const Matrix& support, bool normalize) {
  const DtwResult r = dtw(frame_distance_matrix(query, support));
  return normalize ? -r.cost / static_cast<double>(r.path.steps.size()) : -r.cost;
}

double SaliencyParams::scale() const { return 1.0 / std::sqrt(static_cast<double>(queries.cols())); }

SaliencyParams SaliencyParams::zeros(int heads, int dim) { return {Matrix::Zero(heads, dim)}; }

SaliencyOutput multi_saliency(const Matrix& seq, const SaliencyParams& params) {
  if (params.queries.rows() < 1) throw ShapeError("multi_saliency needs at least one head");
  if (params.queries.cols() != seq.cols()) {
    throw ShapeError("multi_saliency: queries have dim " + std::to_string(params.queries.cols()) +
                     ", sequence has dim " + std::to_string(seq.cols()));
  }
  if (seq.rows() < 1) throw ShapeError("multi_saliency needs at least one frame");
  SaliencyOutput out;
  Matrix logits = (params.queries * seq.transpose()) * params.scale();  // S x T
  out.attention.resize(logits.rows(), logits.cols());
  for (Eigen::Index s = 0; s < logits.rows(); ++s) {
    const double mx = logits.row(s).maxCoeff();
    const RowVector e = (logits.row(s).array() - mx).exp().matrix();
    out.attention.row(s) = e / e.sum();
  }
  out.descriptor = out.attention * seq;
  return out;
}

double descriptor_similarity(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("descriptor_similarity: shape mismatch");
  double sum = 0.0;
  for (Eigen::Index s = 0; s < a.rows(); ++s) sum += cosine(a.row(s).transpose(), b.row(s).transpose());
  return sum / static_cast<double>(a.rows());
}

}  // namespace fsvc
