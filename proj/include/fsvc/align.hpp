#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "fsvc/types.hpp"

namespace fsvc {

/// Average over rows (time). Requires at least one row.
Vector mean_pool(const Matrix& seq);

/// a.b / (|a||b|). Throws DegenerateInputError if either norm is zero.
double cosine(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// Gradients of cosine(a, b) with respect to a and b.
struct CosineGrad {
  double value;
  Vector d_a;
  Vector d_b;
};
CosineGrad cosine_with_grad(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// d(i, j) = 1 - cosine(q_i, s_j), entries in [0, 2].
using DistanceMatrix = Matrix;

/// Throws DegenerateInputError naming "query"/"support" and the frame index
/// of the first zero-norm frame.
DistanceMatrix frame_distance_matrix(const Matrix& query, const Matrix& support);

struct AlignmentPath {
  std::vector<std::pair<int, int>> steps;  // (query frame, support frame), from (0,0) to the end

  /// Starts at (0,0), ends at (rows-1, cols-1), steps from {(1,0),(0,1),(1,1)}.
  bool admissible(int rows, int cols) const;
  double cost(const DistanceMatrix& d) const;
};

struct DtwResult {
  double cost;
  AlignmentPath path;
};

/// Full-boundary DTW: A(i,j) = d(i,j) + min(A(i-1,j-1), A(i-1,j), A(i,j-1)).
/// Backtracking prefers the diagonal, then (i-1,j), then (i,j-1) on ties.
DtwResult dtw(const DistanceMatrix& d);

/// Largest side accepted by dtw_bruteforce.
inline constexpr int kBruteforceMaxSide = 6;

/// Minimum path sum by exhaustive enumeration of monotone paths. Test oracle;
/// throws CapacityError when either side exceeds kBruteforceMaxSide.
double dtw_bruteforce(const DistanceMatrix& d);

/// Negative DTW cost between two embedded sequences; with `normalize` the cost
/// is divided by the path length.
double otam_similarity(const Matrix& query, const Matrix& support, bool normalize = false);

/// Attention queries for the multi-saliency descriptor, one row per head.
struct SaliencyParams {
  Matrix queries;  // S x C
  double scale() const;  // 1 / sqrt(C)

  static SaliencyParams zeros(int heads, int dim);
};

struct SaliencyOutput {
  Matrix descriptor;  // S x C, row s = sum_t attention(s,t) * x_t
  Matrix attention;   // S x T, rows sum to 1
};

/// Softmax over time of scale * (u_s . x_t) per head, then attention-weighted sums.
SaliencyOutput multi_saliency(const Matrix& seq, const SaliencyParams& params);

/// Mean over heads of the per-row cosine between two descriptors.
double descriptor_similarity(const Matrix& a, const Matrix& b);

}  // namespace fsvc
