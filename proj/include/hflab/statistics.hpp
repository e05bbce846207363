// Sample statistics and the two-sample Kolmogorov-Smirnov test.

#pragma once

#include <cstddef>
#include <vector>

namespace hflab {

double sample_mean(const std::vector<double>& x);
/// Unbiased sample variance.
double sample_variance(const std::vector<double>& x);

/// sup_x |F_a(x) - F_b(x)| of the empirical distribution functions; ties handled jointly.
double ks_distance(std::vector<double> a, std::vector<double> b);

/// Critical value 1.63 sqrt((n + m) / (n m)) at level 0.01.
double ks_threshold(std::size_t n, std::size_t m);

}  // namespace hflab
