#pragma once

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace proxilab {

/// Soft ordinal label configuration: K classes evenly spaced over [0, 100].
struct SordConfig {
  int num_classes = 101;
  double distance_scale = 5.0;

  void validate() const;
  double class_value(int i) const { return 100.0 * i / (num_classes - 1); }
  Eigen::VectorXd class_values() const;
};

/// Numerically stable softmax of a vector expression.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar peak = logits.maxCoeff();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> e = (logits.array() - peak).exp().matrix();
  return e / e.sum();
}

/// Column-wise softmax for a batch of logits (classes x batch).
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

/// p_i = softmax_i(-|score - c_i| / tau).
Eigen::VectorXd soft_label(double score, const SordConfig& cfg);

inline constexpr double kKlFloor = 1e-12;

/// KL(p || q) with q clipped below at 1e-12; zero-probability p terms vanish.
template <typename DerivedP, typename DerivedQ>
double kl_divergence(const Eigen::MatrixBase<DerivedP>& p, const Eigen::MatrixBase<DerivedQ>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double pi = p(i);
    if (pi <= 0.0) continue;
    acc += pi * std::log(pi / std::max(static_cast<double>(q(i)), kKlFloor));
  }
  return acc;
}

/// Expected score of a class distribution.
double expected_score(const Eigen::VectorXd& probs, const SordConfig& cfg);

}  // namespace proxilab
