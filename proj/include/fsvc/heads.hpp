#pragma once

#include <span>
#include <vector>

#include "fsvc/rng.hpp"
#include "fsvc/types.hpp"

namespace fsvc {

/// Affine classifier: logits = W x + b.
struct LinearHead {
  Matrix W;  // outputs x inputs
  Vector b;  // outputs

  Eigen::Index outputs() const { return W.rows(); }
  Eigen::Index inputs() const { return W.cols(); }

  /// Uniform(-1/sqrt(inputs), 1/sqrt(inputs)) for both W and b.
  static LinearHead random(int outputs, int inputs, RngStream& rng);
};

/// Throws ShapeError if x does not match head.inputs().
Vector linear_forward(const LinearHead& head, const Eigen::Ref<const Vector>& x);

struct XentResult {
  double loss;
  Vector dlogits;  // softmax - onehot(label)
};

/// Numerically stable -log softmax(logits)[label] and its gradient.
XentResult softmax_xent(const Eigen::Ref<const Vector>& logits, int label);

/// Inverted dropout: each entry is 0 with probability p, else 1/(1-p).
Vector dropout_mask(RngStream& rng, double p, Eigen::Index dim);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for a fixed list of parameter blocks.
class AdamState {
 public:
  AdamState(AdamConfig config, std::span<const Matrix* const> params);

  const AdamConfig& config() const { return config_; }
  long steps() const { return step_; }

  /// One bias-corrected Adam update of every block in place.
  /// Throws ShapeError if the block list or shapes differ from construction.
  void step(std::span<Matrix* const> params, std::span<const Matrix> grads);

 private:
  AdamConfig config_;
  long step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// One labelled support logit vector z(x; k).
struct LabelledVector {
  Vector value;
  int label;
};

/// Row k of the returned head is the L2-normalized mean of class k's vectors; bias is zero.
/// Throws CoverageError if some class in 0..n_way-1 is missing and
/// DegenerateInputError if a class mean has zero norm.
LinearHead imprint(std::span<const LabelledVector> support, int n_way);

/// Mean cross-entropy of head over rows of `features` and its gradient.
struct HeadLossGrad {
  double loss;
  Matrix dW;
  Vector db;
};
HeadLossGrad head_loss_grad(const LinearHead& head, const Matrix& features, std::span<const int> labels);

struct HeadTrainConfig {
  int iters = 100;
  double lr = 1e-3;
  double dropout_p = 0.0;
};

/// Full-batch Adam on mean softmax cross-entropy for exactly config.iters
/// steps. Inputs are dropped out each step when dropout_p > 0. Rows of
/// `features` are samples; labels index head outputs.
LinearHead train_head(const Matrix& features, std::span<const int> labels, LinearHead init,
                      const HeadTrainConfig& config, RngStream& rng);

/// Index of the first maximum.
int argmax(const Eigen::Ref<const Vector>& v);

}  // namespace fsvc
