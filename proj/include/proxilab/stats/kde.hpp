#pragma once

#include <Eigen/Core>

#include <span>
#include <vector>

namespace proxilab::stats {

/// Gaussian-kernel density estimate over 1-D or 2-D samples (one per row).
class KdeModel {
 public:
  KdeModel(Eigen::MatrixXd samples, double bandwidth = 1.0);
  static KdeModel from_values(std::span<const double> values, double bandwidth = 1.0);

  double density(const Eigen::VectorXd& x) const;
  double density(double x) const;

  double bandwidth() const { return bandwidth_; }
  Eigen::Index dimension() const { return samples_.cols(); }
  const Eigen::MatrixXd& samples() const { return samples_; }

 private:
  Eigen::MatrixXd samples_;
  double bandwidth_;
};

double kde_density(const KdeModel& model, double x);

/// Grid point (row of `grid`) with the highest density; first wins on ties.
Eigen::VectorXd kde_mode(const KdeModel& model, const Eigen::MatrixXd& grid);
double kde_mode(const KdeModel& model, std::span<const double> grid);

std::vector<double> linspace(double lo, double hi, int count);

/// Bandwidth with the best leave-one-out log-likelihood among `candidates`.
double select_bandwidth_loo(const Eigen::MatrixXd& samples, std::span<const double> candidates);

}  // namespace proxilab::stats
