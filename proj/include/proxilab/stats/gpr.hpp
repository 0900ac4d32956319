#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>

namespace proxilab::stats {

/// k(a, b) = (1 + |a - b|^2 / (2 alpha l^2))^(-alpha)
template <typename Scalar = double>
struct RationalQuadraticKernel {
  Scalar alpha = 1;
  Scalar length_scale = 1;

  template <typename A, typename B>
  Scalar operator()(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) const {
    const Scalar r2 = (a - b).squaredNorm();
    return std::pow(Scalar(1) + r2 / (Scalar(2) * alpha * length_scale * length_scale), -alpha);
  }
};

struct GprConfig {
  RationalQuadraticKernel<double> kernel{};
  double noise_variance = 1e-8;
};

struct GprPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// Zero-mean GP posterior. Inputs are rows of X.
class GprModel {
 public:
  GprModel(Eigen::MatrixXd X, Eigen::VectorXd y, const GprConfig& cfg);

  GprPrediction predict(const Eigen::VectorXd& x) const;
  double predict_mean(double x) const { return predict(Eigen::VectorXd::Constant(1, x)).mean; }

  const Eigen::MatrixXd& inputs() const { return X_; }
  const Eigen::VectorXd& targets() const { return y_; }
  const GprConfig& config() const { return cfg_; }
  /// Diagonal term actually added (noise plus any jitter escalation).
  double diagonal_added() const { return diag_; }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  GprConfig cfg_;
  double diag_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  Eigen::VectorXd weights_;
};

/// Throws NumericalError if the kernel matrix stays singular after jitter
/// escalation from 1e-10 up to 1e-4.
GprModel gpr_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const GprConfig& cfg = {});
GprPrediction gpr_predict(const GprModel& model, const Eigen::VectorXd& x);

}  // namespace proxilab::stats
