#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace proxilab {

struct SmoothingConfig {
  int window = 61;
  int polyorder = 1;

  void validate() const {
    if (window < 1 || window % 2 == 0) throw std::invalid_argument("savitzky_golay: window must be odd and >= 1");
    if (polyorder < 0 || polyorder >= window) {
      throw std::invalid_argument("savitzky_golay: polyorder must be in [0, window)");
    }
  }
};

namespace detail {

/// Weights w such that w . y[lo..hi] is the value at `at` of the
/// least-squares polynomial of degree `order` through (lo..hi, y).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> savgol_weights(int lo, int hi, int at, int order) {
  const int m = hi - lo + 1;
  const int deg = std::min(order, m - 1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> vander(m, deg + 1);
  for (int r = 0; r < m; ++r) {
    const Scalar x = static_cast<Scalar>(lo + r - at);
    Scalar p = 1;
    for (int c = 0; c <= deg; ++c) {
      vander(r, c) = p;
      p *= x;
    }
  }
  // Evaluating at offset 0 picks the constant coefficient: row 0 of pinv(V).
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> pinv =
      vander.colPivHouseholderQr().solve(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(m, m));
  return pinv.row(0).transpose();
}

}  // namespace detail

/// Precomputed Savitzky-Golay weights for a fixed signal length.
///
/// Every sample is replaced by the centre value of a least-squares polynomial
/// fit over its window; near the ends the window is truncated to the
/// available samples (no padding) and the fit degree is capped by the number
/// of points.
template <typename Scalar>
class SavgolFilter {
 public:
  SavgolFilter(int length, const SmoothingConfig& cfg) : length_(length) {
    cfg.validate();
    if (length < 1) throw std::invalid_argument("savitzky_golay: empty signal");
    const int half = cfg.window / 2;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> interior;
    if (length >= cfg.window) interior = detail::savgol_weights<Scalar>(-half, half, 0, cfg.polyorder);
    for (int i = 0; i < length; ++i) {
      const int lo = std::max(0, i - half);
      const int hi = std::min(length - 1, i + half);
      starts_.push_back(lo);
      if (hi - lo + 1 == cfg.window) {
        weights_.push_back(interior);
      } else {
        weights_.push_back(detail::savgol_weights<Scalar>(lo, hi, i, cfg.polyorder));
      }
    }
  }

  int length() const { return length_; }

  template <typename Derived>
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> apply(const Eigen::MatrixBase<Derived>& signal) const {
    if (signal.size() != length_) throw std::invalid_argument("savitzky_golay: length mismatch");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(length_);
    for (int i = 0; i < length_; ++i) {
      const auto& w = weights_[static_cast<std::size_t>(i)];
      out(i) = w.dot(signal.segment(starts_[static_cast<std::size_t>(i)], w.size()));
    }
    return out;
  }

 private:
  int length_;
  std::vector<int> starts_;
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> weights_;
};

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> savitzky_golay(const Eigen::MatrixBase<Derived>& signal,
                                                                         const SmoothingConfig& cfg) {
  cfg.validate();
  if (signal.size() < 1) throw std::invalid_argument("savitzky_golay: empty signal");
  return SavgolFilter<typename Derived::Scalar>(static_cast<int>(signal.size()), cfg).apply(signal);
}

}  // namespace proxilab
