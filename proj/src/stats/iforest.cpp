#include "proxilab/stats/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace proxilab::stats {

namespace {

constexpr double kEulerGamma = 0.5772156649015329;

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int size = 0;
};

class IsolationTree {
 public:
  IsolationTree(const Eigen::MatrixXd& points, std::vector<Eigen::Index> sample, int height_limit,
                std::mt19937_64& rng) {
    build(points, sample, 0, height_limit, rng);
  }

  double path_length(const Eigen::VectorXd& x) const {
    int node = 0;
    int depth = 0;
    while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
      const Node& n = nodes_[static_cast<std::size_t>(node)];
      node = x(n.feature) < n.threshold ? n.left : n.right;
      ++depth;
    }
    return depth + average_path_length(nodes_[static_cast<std::size_t>(node)].size);
  }

 private:
  int build(const Eigen::MatrixXd& points, std::vector<Eigen::Index>& idx, int depth, int limit, std::mt19937_64& rng) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({-1, 0.0, -1, -1, static_cast<int>(idx.size())});
    if (depth >= limit || idx.size() <= 1) return id;

    std::vector<int> splittable;
    std::vector<std::pair<double, double>> ranges(static_cast<std::size_t>(points.cols()));
    for (Eigen::Index f = 0; f < points.cols(); ++f) {
      double lo = points(idx.front(), f), hi = lo;
      for (auto i : idx) {
        lo = std::min(lo, points(i, f));
        hi = std::max(hi, points(i, f));
      }
      ranges[static_cast<std::size_t>(f)] = {lo, hi};
      if (hi > lo) splittable.push_back(static_cast<int>(f));
    }
    if (splittable.empty()) return id;

    std::uniform_int_distribution<std::size_t> pick(0, splittable.size() - 1);
    const int f = splittable[pick(rng)];
    const auto [lo, hi] = ranges[static_cast<std::size_t>(f)];
    std::uniform_real_distribution<double> cut(lo, hi);
    double threshold = cut(rng);
    if (threshold <= lo) threshold = std::nextafter(lo, hi);

    std::vector<Eigen::Index> left, right;
    for (auto i : idx) (points(i, f) < threshold ? left : right).push_back(i);

    const int l = build(points, left, depth + 1, limit, rng);
    const int r = build(points, right, depth + 1, limit, rng);
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.feature = f;
    n.threshold = threshold;
    n.left = l;
    n.right = r;
    return id;
  }

  std::vector<Node> nodes_;
};

}  // namespace

std::size_t IsolationForestResult::outlier_count() const {
  return static_cast<std::size_t>(std::count(inlier.begin(), inlier.end(), false));
}

double average_path_length(double n) {
  if (n <= 1.0) return 0.0;
  if (n == 2.0) return 1.0;
  const double harmonic = std::log(n - 1.0) + kEulerGamma;
  return 2.0 * harmonic - 2.0 * (n - 1.0) / n;
}

IsolationForestResult isolation_forest(const Eigen::MatrixXd& points, const IsolationForestConfig& cfg) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw std::invalid_argument("isolation_forest: need at least 2 points");
  if (cfg.num_trees < 1) throw std::invalid_argument("isolation_forest: num_trees must be >= 1");
  if (cfg.subsample_size < 2) throw std::invalid_argument("isolation_forest: subsample_size must be >= 2");
  if (cfg.contamination && !(*cfg.contamination > 0.0 && *cfg.contamination < 0.5)) {
    throw std::invalid_argument("isolation_forest: contamination must lie in (0, 0.5)");
  }
  if (!points.allFinite()) throw std::invalid_argument("isolation_forest: non-finite input");

  const auto psi = static_cast<Eigen::Index>(std::min<Eigen::Index>(cfg.subsample_size, n));
  const int height_limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(psi))));
  std::mt19937_64 rng(cfg.seed);

  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Eigen::Index{0});

  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  for (int t = 0; t < cfg.num_trees; ++t) {
    std::vector<Eigen::Index> sample = all;
    std::shuffle(sample.begin(), sample.end(), rng);
    sample.resize(static_cast<std::size_t>(psi));
    const IsolationTree tree(points, std::move(sample), height_limit, rng);
    for (Eigen::Index i = 0; i < n; ++i) total(i) += tree.path_length(points.row(i).transpose());
  }

  IsolationForestResult r;
  const double norm = average_path_length(static_cast<double>(psi));
  r.scores = (total / cfg.num_trees).unaryExpr([norm](double h) { return std::pow(2.0, -h / norm); });
  r.inlier.assign(static_cast<std::size_t>(n), true);
  if (cfg.contamination) {
    const auto k = static_cast<std::size_t>(std::ceil(*cfg.contamination * static_cast<double>(n)));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return r.scores(a) > r.scores(b); });
    for (std::size_t i = 0; i < k && i < order.size(); ++i) r.inlier[static_cast<std::size_t>(order[i])] = false;
  } else {
    for (Eigen::Index i = 0; i < n; ++i) r.inlier[static_cast<std::size_t>(i)] = r.scores(i) <= 0.5 + 1e-9;
  }
  return r;
}

Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& points) {
  Eigen::MatrixXd out = points;
  for (Eigen::Index c = 0; c < points.cols(); ++c) {
    const double m = points.col(c).mean();
    const double sd = std::sqrt((points.col(c).array() - m).square().mean());
    out.col(c).array() -= m;
    if (sd > 1e-12) out.col(c) /= sd;
  }
  return out;
}

}  // namespace proxilab::stats
