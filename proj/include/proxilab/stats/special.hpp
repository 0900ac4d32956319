#pragma once

namespace proxilab::stats {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

double student_t_cdf(double t, double df);
double normal_cdf(double z);

}  // namespace proxilab::stats
