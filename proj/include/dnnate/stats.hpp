#pragma once

#include <span>
#include <vector>

namespace dnnate {

// Standard normal CDF.
double normal_cdf(double x);

// Inverse standard normal CDF (Wichura's AS 241, about 1e-16 relative accuracy).
// p must lie in (0, 1).
double normal_quantile(double p);

double mean(std::span<const double> v);

// (n/(n-1)) * (mean of squares - squared mean); needs n >= 2.
double split_variance(std::span<const double> v);

// Middle order statistic; average of the two central ones for even length.
double median(std::span<const double> v);

// Linear-interpolation quantile between order statistics (h = (n-1) q).
double quantile(std::span<const double> v, double q);

// Sample standard deviation with n-1 denominator; 0 for a single value.
double sample_sd(std::span<const double> v);

}  // namespace dnnate
