#include "proxilab/stats/gpr.hpp"

#include "proxilab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace proxilab::stats {

GprModel::GprModel(Eigen::MatrixXd X, Eigen::VectorXd y, const GprConfig& cfg)
    : X_(std::move(X)), y_(std::move(y)), cfg_(cfg) {
  if (X_.rows() < 1) throw std::invalid_argument("gpr_fit: need at least one training input");
  if (X_.rows() != y_.size()) throw std::invalid_argument("gpr_fit: X and y length mismatch");
  if (!(cfg_.kernel.alpha > 0.0 && cfg_.kernel.length_scale > 0.0)) {
    throw std::invalid_argument("gpr_fit: kernel parameters must be positive");
  }
  if (!(cfg_.noise_variance >= 0.0)) throw std::invalid_argument("gpr_fit: noise_variance must be >= 0");

  const Eigen::Index n = X_.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      K(i, j) = K(j, i) = cfg_.kernel(X_.row(i), X_.row(j));
    }
  }
  for (double jitter = 1e-10; jitter <= 1e-4 * 1.0001; jitter *= 10.0) {
    diag_ = cfg_.noise_variance + jitter;
    Eigen::MatrixXd Kj = K;
    Kj.diagonal().array() += diag_;
    chol_.compute(Kj);
    if (chol_.info() == Eigen::Success && (chol_.matrixLLT().diagonal().array() > 0.0).all()) {
      weights_ = chol_.solve(y_);
      if (weights_.allFinite()) return;
    }
  }
  throw NumericalError("gpr_fit: kernel matrix is singular even after jitter escalation");
}

GprPrediction GprModel::predict(const Eigen::VectorXd& x) const {
  if (x.size() != X_.cols()) throw std::invalid_argument("gpr_predict: input dimension mismatch");
  Eigen::VectorXd k(X_.rows());
  for (Eigen::Index i = 0; i < X_.rows(); ++i) k(i) = cfg_.kernel(X_.row(i).transpose(), x);
  const double mean = k.dot(weights_);
  const Eigen::VectorXd v = chol_.matrixL().solve(k);
  const double var = cfg_.kernel(x, x) - v.squaredNorm();
  return {mean, std::max(var, 0.0)};
}

GprModel gpr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GprConfig& cfg) { return {X, y, cfg}; }

GprPrediction gpr_predict(const GprModel& model, const Eigen::VectorXd& x) { return model.predict(x); }

}  // namespace proxilab::stats
