#include "efnlm/gof.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "efnlm/error.hpp"

namespace efnlm {

MomentSummary sample_moments(std::span<const double> xs) {
  if (xs.size() < 2) fail(ErrorCode::DegenerateSample, "need at least two values for moments");
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double x : xs) {
    const double d = x - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) fail(ErrorCode::DegenerateSample, "sample has zero variance");
  return {mean, m2, m3 / std::pow(m2, 1.5), m4 / (m2 * m2)};
}

double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // Same function through the Jacobi theta identity; the alternating
    // series converges too slowly here.
    const double y = std::exp(-std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda));
    double cdf = 0.0;
    for (int k = 1;; k += 2) {
      const double term = std::pow(y, k * k);
      cdf += term;
      if (term < 1e-16 * cdf || k > 201) break;
    }
    cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-12 * std::max(sum, 1e-300) || term == 0.0) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double kolmogorov_pvalue(double statistic, double n_effective) {
  if (!(n_effective > 0.0)) fail(ErrorCode::DomainError, "kolmogorov_pvalue: effective size must be positive");
  if (statistic <= 0.0) return 1.0;
  const double root = std::sqrt(n_effective);
  return kolmogorov_q((root + 0.12 + 0.11 / root) * statistic);
}

KsResult ks_one_sample(std::span<const double> xs, const std::function<double(double)>& cdf) {
  if (xs.empty()) fail(ErrorCode::DegenerateSample, "ks_one_sample: empty sample");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    const double upper = static_cast<double>(i + 1) / n - f;
    const double lower = f - static_cast<double>(i) / n;
    d = std::max({d, upper, lower});
  }
  d = std::clamp(d, 0.0, 1.0);
  return {d, kolmogorov_pvalue(d, n), sorted.size(), 0};
}

KsResult ks_two_sample(std::span<const double> xs, std::span<const double> ys) {
  if (xs.empty() || ys.empty()) fail(ErrorCode::DegenerateSample, "ks_two_sample: empty sample");
  std::vector<double> a(xs.begin(), xs.end());
  std::vector<double> b(ys.begin(), ys.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  // Walk the pooled unique values; both ECDFs are evaluated after every tie.
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == t) ++i;
    while (j < b.size() && b[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  return {d, kolmogorov_pvalue(d, na * nb / (na + nb)), a.size(), b.size()};
}

double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace efnlm
