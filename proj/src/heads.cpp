#include "fsvc/heads.hpp"

#include <array>
#include <cmath>
#include <string>

#include "fsvc/error.hpp"

namespace fsvc {

namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

}  // namespace

LinearHead LinearHead::random(int outputs, int inputs, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(inputs));
  LinearHead h{Matrix(outputs, inputs), Vector(outputs)};
  for (int r = 0; r < outputs; ++r) {
    for (int c = 0; c < inputs; ++c) h.W(r, c) = rng.uniform(-bound, bound);
  }
  for (int r = 0; r < outputs; ++r) h.b(r) = rng.uniform(-bound, bound);
  return h;
}

Vector linear_forward(const LinearHead& head, const Eigen::Ref<const Vector>& x) {
  if (x.size() != head.W.cols() || head.b.size() != head.W.rows()) {
    throw ShapeError("linear_forward: W is " + shape(head.W) + ", b has " + std::to_string(head.b.size()) +
                     " entries, x has " + std::to_string(x.size()));
  }
  return head.W * x + head.b;
}

XentResult softmax_xent(const Eigen::Ref<const Vector>& logits, int label) {
  if (label < 0 || label >= logits.size()) {
    throw ValidationError("softmax_xent: label " + std::to_string(label) + " out of range for " +
                          std::to_string(logits.size()) + " classes");
  }
  const double mx = logits.maxCoeff();
  Vector p = (logits.array() - mx).exp().matrix();
  const double z = p.sum();
  p /= z;
  XentResult r{std::log(z) - (logits(label) - mx), std::move(p)};
  r.dlogits(label) -= 1.0;
  return r;
}

Vector dropout_mask(RngStream& rng, double p, Eigen::Index dim) {
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("dropout probability must be in [0, 1)");
  if (p == 0.0) return Vector::Ones(dim);
  const double keep = 1.0 / (1.0 - p);
  Vector mask(dim);
  for (Eigen::Index i = 0; i < dim; ++i) mask(i) = rng.uniform() < p ? 0.0 : keep;
  return mask;
}

AdamState::AdamState(AdamConfig config, std::span<const Matrix* const> params) : config_(config) {
  for (const Matrix* p : params) {
    m_.push_back(Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void AdamState::step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam: expected " + std::to_string(m_.size()) + " parameter blocks, got " +
                     std::to_string(params.size()) + " params and " + std::to_string(grads.size()) + " grads");
  }
  for (std::size_t k = 0; k < m_.size(); ++k) {
    if (params[k]->rows() != m_[k].rows() || params[k]->cols() != m_[k].cols() || grads[k].rows() != m_[k].rows() ||
        grads[k].cols() != m_[k].cols()) {
      throw ShapeError("adam: block " + std::to_string(k) + " expected " + shape(m_[k]) + ", got param " +
                       shape(*params[k]) + " and grad " + shape(grads[k]));
    }
  }
  ++step_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < m_.size(); ++k) {
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * grads[k];
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * grads[k].cwiseAbs2();
    params[k]->array() -= config_.lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + config_.eps);
  }
}

LinearHead imprint(std::span<const LabelledVector> support, int n_way) {
  if (support.empty()) throw CoverageError("imprint: empty support set");
  const Eigen::Index dim = support.front().value.size();
  Matrix sums = Matrix::Zero(n_way, dim);
  std::vector<int> counts(static_cast<std::size_t>(n_way), 0);
  for (const auto& s : support) {
    if (s.label < 0 || s.label >= n_way) {
      throw ValidationError("imprint: label " + std::to_string(s.label) + " outside 0.." + std::to_string(n_way - 1));
    }
    if (s.value.size() != dim) throw ShapeError("imprint: support vectors differ in dimension");
    sums.row(s.label) += s.value.transpose();
    ++counts[static_cast<std::size_t>(s.label)];
  }
  LinearHead head{Matrix(n_way, dim), Vector::Zero(n_way)};
  for (int k = 0; k < n_way; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw CoverageError("imprint: class " + std::to_string(k) + " has no support sample");
    }
    const RowVector mean = sums.row(k) / counts[static_cast<std::size_t>(k)];
    const double norm = mean.norm();
    if (norm == 0.0) throw DegenerateInputError("imprint: class " + std::to_string(k) + " has a zero-norm mean logit");
    head.W.row(k) = mean / norm;
  }
  return head;
}

HeadLossGrad head_loss_grad(const LinearHead& head, const Matrix& features, std::span<const int> labels) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ShapeError("head_loss_grad: " + std::to_string(features.rows()) + " samples but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (features.cols() != head.W.cols()) {
    throw ShapeError("head_loss_grad: W is " + shape(head.W) + ", features are " + shape(features));
  }
  const auto n = static_cast<double>(features.rows());
  HeadLossGrad g{0.0, Matrix::Zero(head.W.rows(), head.W.cols()), Vector::Zero(head.b.size())};
  const Matrix logits = (features * head.W.transpose()).rowwise() + head.b.transpose();
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    const XentResult x = softmax_xent(logits.row(i).transpose(), labels[static_cast<std::size_t>(i)]);
    g.loss += x.loss / n;
    g.dW += (x.dlogits / n) * features.row(i);
    g.db += x.dlogits / n;
  }
  return g;
}

LinearHead train_head(const Matrix& features, std::span<const int> labels, LinearHead init,
                      const HeadTrainConfig& config, RngStream& rng) {
  if (features.rows() == 0 || labels.empty()) throw CoverageError("train_head: empty training set");
  LinearHead head = std::move(init);
  if (config.iters <= 0) return head;
  Matrix bias(head.b);
  std::array<const Matrix*, 2> shapes{&head.W, &bias};
  AdamState adam(AdamConfig{config.lr}, shapes);
  const std::array<Matrix*, 2> params{&head.W, &bias};
  Matrix dropped;
  for (int it = 0; it < config.iters; ++it) {
    head.b = bias;
    const Matrix* x = &features;
    if (config.dropout_p > 0.0) {
      dropped = features;
      for (Eigen::Index i = 0; i < dropped.rows(); ++i) {
        dropped.row(i).array() *= dropout_mask(rng, config.dropout_p, dropped.cols()).transpose().array();
      }
      x = &dropped;
    }
    HeadLossGrad g = head_loss_grad(head, *x, labels);
    const std::array<Matrix, 2> grads{std::move(g.dW), Matrix(g.db)};
    adam.step(params, grads);
  }
  head.b = bias;
  return head;
}

int argmax(const Eigen::Ref<const Vector>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = i;
  }
  return static_cast<int>(best);
}

}  // namespace fsvc
