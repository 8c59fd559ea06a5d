#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace saferec {

// Deterministic pairwise summation. Used for every dataset-level reduction
// so results are bit-stable for a fixed input order, independent of how the
// per-element values were computed (serially or in parallel).
double pairwise_sum(std::span<const double> xs);

double mean(std::span<const double> xs);

// Unbiased sample standard deviation (n-1 denominator).
double sample_std(std::span<const double> xs);
double sample_variance(std::span<const double> xs);

// Nearest-rank percentile (q in [0,1]) of a copy-sorted input.
double percentile(std::span<const double> xs, double q);

// Standard normal CDF and quantile. The quantile uses a rational
// approximation refined by one Newton step; absolute error < 1e-13.
double normal_cdf(double x);
double normal_quantile(double p);

// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Student's t CDF and quantile with nu > 0 degrees of freedom. The quantile
// inverts the CDF by Newton iteration started from the normal quantile;
// absolute error well below 1e-9 over the tested range.
double student_t_cdf(double t, double nu);
double student_t_quantile(double p, double nu);

}  // namespace saferec
