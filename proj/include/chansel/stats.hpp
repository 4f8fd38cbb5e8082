#pragma once

#include <span>

namespace chansel::stats {

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> v);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// CDF of Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);
// Inverse of student_t_cdf for p in (0, 1), by bisection on the CDF.
double student_t_quantile(double p, double df);

// Half-width multiplier of a two-sided `confidence` interval from n samples.
double t_multiplier(double confidence, int n);

}  // namespace chansel::stats
