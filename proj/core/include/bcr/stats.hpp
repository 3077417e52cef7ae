#pragma once

#include <span>

namespace bcr::stats {

double mean(std::span<const double> xs);
// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> xs);
double std_error(std::span<const double> xs);

// Nearest-rank empirical quantile, q in [0, 1].
double quantile(std::span<const double> xs, double q);

// Ordinary least-squares slope of ys against xs.
double ols_slope(std::span<const double> xs, std::span<const double> ys);

// Standard normal quantile function.
double normal_quantile(double p);

}  // namespace bcr::stats
