#pragma once

#include <cstddef>
#include <span>

namespace imulab {

// Pairwise (cascade) summation. Fixed reduction tree, so the result depends only
// on the input order, never on thread scheduling.
double pairwise_sum(std::span<const double> values);

double mean(std::span<const double> values);

// Unbiased sample variance (N-1 denominator). Requires at least two values.
double sample_variance(std::span<const double> values);

// Least-squares slope of log10(y) against log10(x). All values must be positive.
double loglog_slope(std::span<const double> x, std::span<const double> y);

// Maximum worker count for OpenMP regions: IMULAB_THREADS when set and > 0,
// otherwise the OpenMP default.
int thread_limit();

}  // namespace imulab
