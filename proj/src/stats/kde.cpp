#include "proxilab/stats/kde.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace proxilab::stats {

namespace {

double gaussian_kernel_sum(const Eigen::MatrixXd& samples, const Eigen::VectorXd& x, double h, Eigen::Index skip = -1) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    if (i == skip) continue;
    acc += std::exp(-0.5 * (samples.row(i).transpose() - x).squaredNorm() / (h * h));
  }
  return acc;
}

double kernel_norm(Eigen::Index dim, double h) { return std::pow(2.0 * std::numbers::pi * h * h, 0.5 * dim); }

}  // namespace

KdeModel::KdeModel(Eigen::MatrixXd samples, double bandwidth) : samples_(std::move(samples)), bandwidth_(bandwidth) {
  if (!(bandwidth_ > 0.0)) throw std::invalid_argument("kde: bandwidth must be > 0");
  if (samples_.rows() < 1) throw std::invalid_argument("kde: need at least one sample");
  if (samples_.cols() < 1 || samples_.cols() > 2) throw std::invalid_argument("kde: samples must be 1-D or 2-D");
}

KdeModel KdeModel::from_values(std::span<const double> values, double bandwidth) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  return KdeModel(std::move(m), bandwidth);
}

double KdeModel::density(const Eigen::VectorXd& x) const {
  if (x.size() != samples_.cols()) throw std::invalid_argument("kde: query dimension mismatch");
  return gaussian_kernel_sum(samples_, x, bandwidth_) /
         (static_cast<double>(samples_.rows()) * kernel_norm(samples_.cols(), bandwidth_));
}

double KdeModel::density(double x) const { return density(Eigen::VectorXd::Constant(1, x)); }

double kde_density(const KdeModel& model, double x) { return model.density(x); }

Eigen::VectorXd kde_mode(const KdeModel& model, const Eigen::MatrixXd& grid) {
  if (grid.rows() == 0) throw std::invalid_argument("kde_mode: empty grid");
  Eigen::Index best = 0;
  double best_d = -1.0;
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    const double d = model.density(Eigen::VectorXd(grid.row(i).transpose()));
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return grid.row(best).transpose();
}

double kde_mode(const KdeModel& model, std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("kde_mode: empty grid");
  Eigen::MatrixXd g(static_cast<Eigen::Index>(grid.size()), 1);
  for (std::size_t i = 0; i < grid.size(); ++i) g(static_cast<Eigen::Index>(i), 0) = grid[i];
  return kde_mode(model, g)(0);
}

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw std::invalid_argument("linspace: count must be >= 1");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return out;
}

double select_bandwidth_loo(const Eigen::MatrixXd& samples, std::span<const double> candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_bandwidth_loo: no candidates");
  if (samples.rows() < 2) throw std::invalid_argument("select_bandwidth_loo: need at least two samples");
  double best_h = candidates.front();
  double best_ll = -std::numeric_limits<double>::infinity();
  const auto n = static_cast<double>(samples.rows());
  for (double h : candidates) {
    if (!(h > 0.0)) throw std::invalid_argument("select_bandwidth_loo: bandwidths must be > 0");
    double ll = 0.0;
    for (Eigen::Index i = 0; i < samples.rows(); ++i) {
      const double d = gaussian_kernel_sum(samples, samples.row(i).transpose(), h, i) /
                       ((n - 1.0) * kernel_norm(samples.cols(), h));
      ll += std::log(std::max(d, 1e-300));
    }
    if (ll > best_ll) {
      best_ll = ll;
      best_h = h;
    }
  }
  return best_h;
}

}  // namespace proxilab::stats
