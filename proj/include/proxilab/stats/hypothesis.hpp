#pragma once

#include <optional>
#include <span>
#include <vector>

namespace proxilab::stats {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<int> df;
};

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_std(std::span<const double> v);
/// Population standard deviation (n denominator).
double population_std(std::span<const double> v);

/// Ranks starting at 1, ties receive their average rank.
std::vector<double> average_ranks(std::span<const double> v);

double pearson(std::span<const double> x, std::span<const double> y);

/// Lower-tailed paired t-test of a - b. When the differences have zero
/// variance, t is 0 / -inf / +inf by the sign of their mean and p is
/// 0.5 / 0 / 1 accordingly.
TestResult paired_t_lower(std::span<const double> a, std::span<const double> b);

/// Spearman rank correlation with a two-sided p-value from the
/// t-approximation (df = n - 2). Throws NumericalError on constant input.
TestResult spearman(std::span<const double> x, std::span<const double> y);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::span<const double> a, std::span<const double> b);

}  // namespace proxilab::stats
