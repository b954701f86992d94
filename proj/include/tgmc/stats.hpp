#pragma once

#include <span>

namespace tgmc::stats {

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov
/// distribution evaluated at sqrt(m n / (m + n)) D (Stephens' correction).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double chi2 = 0.0;
};

/// Weighted least squares of y on x with weights w (inverse variances).
/// Standard errors come from the weights alone. Throws InvalidArgument for
/// fewer than two points, nonpositive weights or a degenerate design.
LinearFit weighted_linear_fit(std::span<const double> x, std::span<const double> y,
                              std::span<const double> w);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> v);

}  // namespace tgmc::stats
