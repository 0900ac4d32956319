#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <vector>

namespace proxilab::stats {

struct IsolationForestConfig {
  int num_trees = 100;
  int subsample_size = 256;
  std::uint64_t seed = 0;
  /// Unset: flag points scoring above 0.5. Set: flag the top fraction.
  std::optional<double> contamination;
};

struct IsolationForestResult {
  Eigen::VectorXd scores;
  std::vector<bool> inlier;

  std::size_t outlier_count() const;
};

/// Average path length of an unsuccessful BST search among n points.
double average_path_length(double n);

/// Scores each row of `points` (one point per row) with an isolation forest
/// grown on the same points.
IsolationForestResult isolation_forest(const Eigen::MatrixXd& points, const IsolationForestConfig& cfg);

/// Column-wise z-scores; constant columns are centred only.
Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& points);

}  // namespace proxilab::stats
