#include "proxilab/errors.hpp"
#include "proxilab/stats/gpr.hpp"
#include "proxilab/stats/hypothesis.hpp"
#include "proxilab/stats/iforest.hpp"
#include "proxilab/stats/kde.hpp"
#include "proxilab/stats/special.hpp"

#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

using namespace proxilab;
using namespace proxilab::stats;

TEST_CASE("paired lower-tailed t-test reference") {
  const std::vector<double> a{1, 2, 4};
  const std::vector<double> b{2, 2, 5};
  const auto r = paired_t_lower(a, b);
  CHECK(r.statistic == doctest::Approx(-2.0));
  REQUIRE(r.df.has_value());
  CHECK(*r.df == 2);
  CHECK(r.p_value == doctest::Approx(0.0918).epsilon(1e-3));

  const auto same = paired_t_lower(a, a);
  CHECK(same.statistic == 0.0);
  CHECK(same.p_value == 0.5);

  const std::vector<double> c{0, 1, 3};
  const auto shifted = paired_t_lower(c, a);
  CHECK(shifted.statistic == -std::numeric_limits<double>::infinity());
  CHECK(shifted.p_value == 0.0);
  CHECK_THROWS_AS(paired_t_lower(a, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST_CASE("Student t and normal CDF values") {
  CHECK(student_t_cdf(0.0, 5.0) == doctest::Approx(0.5));
  CHECK(student_t_cdf(-2.0, 2.0) == doctest::Approx(0.0918).epsilon(1e-3));
  CHECK(student_t_cdf(2.0, 10.0) + student_t_cdf(-2.0, 10.0) == doctest::Approx(1.0));
  CHECK(normal_cdf(1.96) == doctest::Approx(0.975).epsilon(1e-3));
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
}

TEST_CASE("Spearman correlation") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(spearman(x, std::vector<double>{1, 2, 3, 5, 4}).statistic == doctest::Approx(0.9));
  CHECK(spearman(x, std::vector<double>{2, 4, 8, 16, 32}).statistic == doctest::Approx(1.0));
  CHECK(spearman(x, std::vector<double>{5, 4, 3, 2, 1}).statistic == doctest::Approx(-1.0));
  CHECK_THROWS_AS(spearman(x, std::vector<double>{1, 1, 1, 1, 1}), NumericalError);
  const auto ranks = average_ranks(std::vector<double>{10, 20, 20, 5});
  CHECK(ranks == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("Kolmogorov-Smirnov statistic") {
  CHECK(ks_statistic(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}) == doctest::Approx(1.0 / 3.0));
  CHECK(ks_statistic(std::vector<double>{1, 2}, std::vector<double>{3, 4}) == doctest::Approx(1.0));
  CHECK(ks_statistic(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}) == 0.0);
}

TEST_CASE("descriptive statistics") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == doctest::Approx(5.0));
  CHECK(population_std(v) == doctest::Approx(2.0));
  CHECK(sample_std(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(sample_std(std::vector<double>{3}) == 0.0);
}

TEST_CASE("KDE integrates to one and finds the midpoint mode") {
  const std::vector<double> samples{0.0, 2.0};
  const auto kde = KdeModel::from_values(samples, 1.0);
  const auto grid = linspace(-10.0, 12.0, 4401);
  double area = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) area += 0.5 * (grid[i] - grid[i - 1]) * (kde.density(grid[i]) + kde.density(grid[i - 1]));
  CHECK(area == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(kde_mode(kde, linspace(-1.0, 3.0, 401)) == doctest::Approx(1.0));

  const auto narrow = KdeModel::from_values(samples, 0.3);
  CHECK(std::abs(kde_mode(narrow, linspace(-1.0, 3.0, 401)) - 1.0) > 0.5);
  CHECK_THROWS_AS(KdeModel::from_values(samples, 0.0), std::invalid_argument);
}

TEST_CASE("two-dimensional KDE integrates to one") {
  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 1, 0.5, -0.5, 1;
  const KdeModel kde(pts, 0.7);
  double area = 0.0;
  const double h = 0.05;
  for (double x = -6; x <= 7; x += h) {
    for (double y = -6; y <= 7; y += h) area += kde.density(Eigen::Vector2d(x, y)) * h * h;
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("GPR interpolates with tiny noise") {
  Eigen::MatrixXd X(5, 1);
  X << 0, 1, 2, 3, 4;
  Eigen::VectorXd y(5);
  y << 0.5, 1.0, 0.2, -0.3, 0.8;
  const auto m = gpr_fit(X, y);
  for (int i = 0; i < 5; ++i) {
    const auto p = m.predict(X.row(i).transpose());
    CHECK(p.mean == doctest::Approx(y(i)).epsilon(1e-4));
    CHECK(p.variance < 1e-4);
  }
}

TEST_CASE("GPR single-point closed form and prior reversion") {
  Eigen::MatrixXd X(1, 1);
  X << 1.0;
  Eigen::VectorXd y(1);
  y << 2.0;
  GprConfig cfg;
  cfg.noise_variance = 0.1;
  const auto m = gpr_fit(X, y, cfg);
  const double n = m.diagonal_added();
  for (double x : {1.0, 1.7, 3.0}) {
    const double k = std::pow(1.0 + (x - 1.0) * (x - 1.0) / 2.0, -1.0);
    const auto p = m.predict(Eigen::VectorXd::Constant(1, x));
    CHECK(p.mean == doctest::Approx(k * 2.0 / (1.0 + n)));
    CHECK(p.variance == doctest::Approx(1.0 - k * k / (1.0 + n)));
  }
  const auto far = m.predict(Eigen::VectorXd::Constant(1, 1e4));
  CHECK(std::abs(far.mean) < 1e-6);
  CHECK(far.variance == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("GPR survives duplicate inputs") {
  Eigen::MatrixXd X(3, 1);
  X << 1.0, 1.0, 2.0;
  Eigen::VectorXd y(3);
  y << 1.0, 1.0, 0.5;
  GprConfig cfg;
  cfg.noise_variance = 0.0;
  const auto m = gpr_fit(X, y, cfg);
  CHECK(m.diagonal_added() > 0.0);
  CHECK(m.predict_mean(1.0) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("isolation forest flags a planted outlier") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.1);
  Eigen::MatrixXd pts(60, 2);
  for (int i = 0; i < 59; ++i) pts.row(i) << n(rng), 1.0 + n(rng);
  pts.row(59) << 5.0, 5.0;
  IsolationForestConfig cfg;
  cfg.seed = 3;
  const auto r = isolation_forest(standardize_columns(pts), cfg);
  CHECK_FALSE(r.inlier[59]);
  Eigen::Index worst = 0;
  r.scores.maxCoeff(&worst);
  CHECK(worst == 59);
  CHECK(r.outlier_count() < 20);

  const auto again = isolation_forest(standardize_columns(pts), cfg);
  CHECK(again.scores == r.scores);
  CHECK(again.inlier == r.inlier);
}

TEST_CASE("isolation forest leaves identical points alone") {
  const Eigen::MatrixXd pts = Eigen::MatrixXd::Constant(20, 2, 1.5);
  const auto r = isolation_forest(pts, IsolationForestConfig{});
  CHECK(r.outlier_count() == 0);
  for (Eigen::Index i = 0; i < r.scores.size(); ++i) CHECK(r.scores(i) == doctest::Approx(0.5));
}

TEST_CASE("isolation forest contamination mode") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd pts(100, 1);
  for (int i = 0; i < 100; ++i) pts(i, 0) = n(rng);
  IsolationForestConfig cfg;
  cfg.contamination = 0.1;
  CHECK(isolation_forest(pts, cfg).outlier_count() == 10);
  CHECK(average_path_length(2.0) == doctest::Approx(1.0));
  CHECK(average_path_length(1.0) == 0.0);
}
