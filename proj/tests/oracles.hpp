#pragma once

// Reference implementations shared by the unit tests and the acceptance
// binary. Written directly from the definitions, without the library's
// forward/backward pass classes.

#include <cstdint>
#include <vector>

#include "fsvc/dataset.hpp"
#include "fsvc/episode.hpp"
#include "fsvc/protocols.hpp"
#include "fsvc/rng.hpp"
#include "fsvc/types.hpp"

namespace fsvc::oracle {

// Recursion over every monotone path from (0,0) to the far corner; min sum.
double dtw_enumerate(const Matrix& d);

double rel_err(const Matrix& a, const Matrix& b);
double cos_sim(const Vector& a, const Vector& b);
double xent(const Vector& logits, int label);

double meta_loss(const EmbeddingParams& e, const Episode& ep, double tau);
double cmn_loss(const EmbeddingParams& e, const Matrix& queries, const Episode& ep, double tau);
double otam_loss(const EmbeddingParams& e, const Episode& ep, double tau, const std::vector<AlignmentPath>& paths,
                 bool normalize);
double classification_loss(const EmbeddingParams& e, const LinearHead& h, const Matrix& pooled,
                           const std::vector<int>& y, const Matrix& masks);

// Welford in long double, n-1 normalization.
double ci95_halfwidth(const std::vector<double>& v);

// i.i.d. standard-normal frames, `per_class` videos for each of `classes` classes.
Dataset random_dataset(RngStream& r, int classes, int per_class, int T, int c_in, Split split = Split::train,
                       int first_class = 0);

// Central differences of `loss` over every entry of `m`.
template <typename F>
Matrix fd_grad(Matrix& m, F&& loss, double h = 1e-5) {
  Matrix g(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double keep = m(i, j);
      m(i, j) = keep + h;
      const double lp = loss();
      m(i, j) = keep - h;
      const double lm = loss();
      m(i, j) = keep;
      g(i, j) = (lp - lm) / (2 * h);
    }
  }
  return g;
}

template <typename F>
Vector fd_grad(Vector& v, F&& loss, double h = 1e-5) {
  Matrix m = v;
  Matrix g = fd_grad(m, [&] {
    v = m;
    return loss();
  }, h);
  v = m;
  return g;
}

}  // namespace fsvc::oracle
