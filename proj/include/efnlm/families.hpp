#pragma once

#include <limits>
#include <string_view>
#include <utility>

#include "efnlm/rng.hpp"

namespace efnlm {

enum class FamilyKind { Normal, Gamma, InverseGaussian };

/// V(mu) and its first two derivatives with respect to mu.
struct VarianceTriple {
  double v = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

/// Open interval holding the true residual (y - mu) / sqrt(V(mu)).
struct ResidualSupport {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double x) const { return x > lower && x < upper; }
};

/// A continuous one-parameter exponential family with common precision phi:
///   pi(y; theta, phi) = exp{phi [y theta - b(theta)] + c(y, phi)},
/// mean b'(theta), variance V(mu) / phi.
class FamilySpec {
 public:
  explicit FamilySpec(FamilyKind kind) : kind_(kind) {}

  /// "normal", "gamma" or "inverse_gaussian"; ConfigError otherwise.
  static FamilySpec from_name(std::string_view name);

  FamilyKind kind() const { return kind_; }
  std::string_view name() const;
  bool is_continuous() const { return true; }

  bool in_mean_domain(double mu) const;
  bool in_response_support(double y) const;

  VarianceTriple variance_fn(double mu) const;
  double theta_of_mu(double mu) const;
  /// b(theta); kept for the b'(theta) = mu consistency check.
  double cumulant(double theta) const;

  /// d/dx c(sqrt(V) x + mu, phi).
  double c_deriv(double x, double mu, double phi) const;

  ResidualSupport residual_support(double mu) const;
  double true_residual_density(double x, double mu, double phi) const;
  double true_residual_cdf(double x, double mu, double phi) const;

  /// First and second derivatives of log f_eps at an interior point.
  /// Closed form for normal and gamma, central differences for inverse
  /// Gaussian (step 1e-5 scaled by 1 + |x|).
  std::pair<double, double> log_density_derivatives(double x, double mu, double phi) const;

  /// One response draw with mean mu and variance V(mu) / phi.
  double sample_response(double mu, double phi, RandomStream& rng) const;

 private:
  void require_mean(double mu) const;
  void require_phi(double phi) const;

  FamilyKind kind_;
};

}  // namespace efnlm
