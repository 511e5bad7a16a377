#pragma once

// Small statistics toolkit used by the experiment harness.

#include <cstddef>
#include <span>
#include <vector>

namespace butterfly::stats {

// Pairwise (cascade) summation.
double pairwise_sum(std::span<const double> x);

struct Moments {
  std::size_t count = 0;
  double mean = 0.0;
  double variance = 0.0;        // unbiased sample variance
  double central4 = 0.0;        // fourth central moment (plug-in)
  double variance_se = 0.0;     // sqrt((m4 - v^2) / R)
};

Moments moments(std::span<const double> x);

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double t = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 1.0;  // H1: slope > 0
};

Regression ols(std::span<const double> x, std::span<const double> y);

// Weighted least squares with weights 1 / se_i^2.
Regression wls(std::span<const double> x, std::span<const double> y, std::span<const double> se);

struct TrendTest {
  double s = 0.0;
  double z = 0.0;
  double p_upward = 1.0;  // one-sided, H1: increasing trend
};

// Mann-Kendall trend test (normal approximation, no tie correction beyond
// the standard variance adjustment).
TrendTest mann_kendall(std::span<const double> y);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace butterfly::stats
