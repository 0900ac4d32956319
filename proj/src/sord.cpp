#include "proxilab/sord.hpp"

#include <string>

namespace proxilab {

void SordConfig::validate() const {
  if (num_classes < 2) throw std::invalid_argument("SordConfig: num_classes must be >= 2");
  if (!(distance_scale > 0.0)) throw std::invalid_argument("SordConfig: distance_scale must be > 0");
}

Eigen::VectorXd SordConfig::class_values() const {
  return Eigen::VectorXd::LinSpaced(num_classes, 0.0, 100.0);
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) out.col(c) = softmax(logits.col(c));
  return out;
}

Eigen::VectorXd soft_label(double score, const SordConfig& cfg) {
  cfg.validate();
  if (!(score >= 0.0 && score <= 100.0)) {
    throw std::invalid_argument("soft_label: score " + std::to_string(score) + " outside [0, 100]");
  }
  const Eigen::VectorXd centers = cfg.class_values();
  const Eigen::VectorXd logits = -((centers.array() - score).abs() / cfg.distance_scale).matrix();
  return softmax(logits);
}

double expected_score(const Eigen::VectorXd& probs, const SordConfig& cfg) {
  if (probs.size() != cfg.num_classes) throw std::invalid_argument("expected_score: length mismatch");
  return probs.dot(cfg.class_values());
}

}  // namespace proxilab
