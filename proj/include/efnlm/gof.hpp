#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace efnlm {

/// Central moments with 1/n normalization; kurtosis is non-excess.
struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
};

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::size_t n2 = 0;  // second sample size, 0 for one-sample tests
};

/// DegenerateSample when fewer than two values or zero variance.
MomentSummary sample_moments(std::span<const double> xs);

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

/// Q((sqrt(n) + 0.12 + 0.11 / sqrt(n)) D), clamped to [0, 1].
double kolmogorov_pvalue(double statistic, double n_effective);

/// D = max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n) over the sorted sample.
KsResult ks_one_sample(std::span<const double> xs, const std::function<double(double)>& cdf);

/// D = sup |F_n - G_m| over the pooled sample; p-value from the effective
/// size n m / (n + m).
KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys);

double standard_normal_cdf(double x);

}  // namespace efnlm
