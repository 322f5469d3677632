#include "efnlm/families.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "efnlm/error.hpp"

namespace efnlm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// exp(t^2) erfc(t) for t >= 0.
double scaled_erfc(double t) {
  if (t < 25.0) return std::exp(t * t) * std::erfc(t);
  const double inv2 = 1.0 / (t * t);
  return (1.0 - 0.5 * inv2 + 0.75 * inv2 * inv2 - 1.875 * inv2 * inv2 * inv2) /
         (t * std::sqrt(std::numbers::pi));
}

// CDF of the inverse Gaussian law with mean mu and shape lambda.
double inverse_gaussian_cdf(double y, double mu, double lambda) {
  if (y <= 0.0) return 0.0;
  if (std::isinf(y)) return 1.0;
  const double root = std::sqrt(lambda / y);
  const double a = root * (y / mu - 1.0);
  const double b = root * (y / mu + 1.0);
  // exp(2 lambda / mu) Phi(-b) == exp(-a^2 / 2) * erfcx(b / sqrt 2) / 2
  const double tail = std::exp(-0.5 * a * a) * 0.5 * scaled_erfc(b / std::numbers::sqrt2);
  return std::min(1.0, normal_cdf(a) + tail);
}

}  // namespace

FamilySpec FamilySpec::from_name(std::string_view name) {
  if (name == "normal") return FamilySpec(FamilyKind::Normal);
  if (name == "gamma") return FamilySpec(FamilyKind::Gamma);
  if (name == "inverse_gaussian") return FamilySpec(FamilyKind::InverseGaussian);
  fail(ErrorCode::ConfigError, "unknown family '" + std::string(name) +
                                   "' (expected normal, gamma or inverse_gaussian)");
}

std::string_view FamilySpec::name() const {
  switch (kind_) {
    case FamilyKind::Normal: return "normal";
    case FamilyKind::Gamma: return "gamma";
    case FamilyKind::InverseGaussian: return "inverse_gaussian";
  }
  return "unknown";
}

bool FamilySpec::in_mean_domain(double mu) const {
  if (!std::isfinite(mu)) return false;
  return kind_ == FamilyKind::Normal || mu > 0.0;
}

bool FamilySpec::in_response_support(double y) const {
  if (!std::isfinite(y)) return false;
  return kind_ == FamilyKind::Normal || y > 0.0;
}

void FamilySpec::require_mean(double mu) const {
  if (!in_mean_domain(mu)) {
    fail(ErrorCode::DomainError,
         "mean " + std::to_string(mu) + " outside the " + std::string(name()) + " mean domain");
  }
}

void FamilySpec::require_phi(double phi) const {
  if (!(phi > 0.0) || !std::isfinite(phi)) {
    fail(ErrorCode::DomainError, "precision phi must be positive and finite");
  }
}

VarianceTriple FamilySpec::variance_fn(double mu) const {
  require_mean(mu);
  switch (kind_) {
    case FamilyKind::Normal: return {1.0, 0.0, 0.0};
    case FamilyKind::Gamma: return {mu * mu, 2.0 * mu, 2.0};
    case FamilyKind::InverseGaussian: return {mu * mu * mu, 3.0 * mu * mu, 6.0 * mu};
  }
  return {};
}

double FamilySpec::theta_of_mu(double mu) const {
  require_mean(mu);
  switch (kind_) {
    case FamilyKind::Normal: return mu;
    case FamilyKind::Gamma: return -1.0 / mu;
    case FamilyKind::InverseGaussian: return -1.0 / (2.0 * mu * mu);
  }
  return 0.0;
}

double FamilySpec::cumulant(double theta) const {
  switch (kind_) {
    case FamilyKind::Normal: return 0.5 * theta * theta;
    case FamilyKind::Gamma:
      if (!(theta < 0.0)) fail(ErrorCode::DomainError, "gamma cumulant needs theta < 0");
      return -std::log(-theta);
    case FamilyKind::InverseGaussian:
      if (!(theta < 0.0)) fail(ErrorCode::DomainError, "inverse Gaussian cumulant needs theta < 0");
      return -std::sqrt(-2.0 * theta);
  }
  return 0.0;
}

double FamilySpec::c_deriv(double x, double mu, double phi) const {
  require_mean(mu);
  if (!residual_support(mu).contains(x)) {
    fail(ErrorCode::DomainError, "c_deriv: residual " + std::to_string(x) + " outside support");
  }
  switch (kind_) {
    case FamilyKind::Normal: return -(x + mu) * phi;
    case FamilyKind::Gamma: return (phi - 1.0) / (1.0 + x);
    case FamilyKind::InverseGaussian: {
      const double m32 = mu * std::sqrt(mu);
      const double y = m32 * x + mu;
      return -1.5 * m32 / y + phi * m32 / (2.0 * y * y);
    }
  }
  return 0.0;
}

ResidualSupport FamilySpec::residual_support(double mu) const {
  require_mean(mu);
  switch (kind_) {
    case FamilyKind::Normal: return {-kInf, kInf};
    case FamilyKind::Gamma: return {-1.0, kInf};
    case FamilyKind::InverseGaussian: return {-1.0 / std::sqrt(mu), kInf};
  }
  return {};
}

double FamilySpec::true_residual_density(double x, double mu, double phi) const {
  require_phi(phi);
  if (!residual_support(mu).contains(x)) return 0.0;
  switch (kind_) {
    case FamilyKind::Normal:
      return std::sqrt(phi / (2.0 * std::numbers::pi)) * std::exp(-0.5 * phi * x * x);
    case FamilyKind::Gamma: {
      const double s = phi * (1.0 + x);
      return std::exp((phi - 1.0) * std::log(s) + std::log(phi) - boost::math::lgamma(phi) - s);
    }
    case FamilyKind::InverseGaussian: {
      const double s = std::sqrt(mu) * x + 1.0;
      return std::sqrt(phi / (2.0 * std::numbers::pi * s * s * s)) * std::exp(-phi * x * x / (2.0 * s));
    }
  }
  return 0.0;
}

double FamilySpec::true_residual_cdf(double x, double mu, double phi) const {
  require_phi(phi);
  const ResidualSupport support = residual_support(mu);
  if (x <= support.lower) return 0.0;
  if (x >= support.upper) return 1.0;
  switch (kind_) {
    case FamilyKind::Normal: return normal_cdf(x * std::sqrt(phi));
    case FamilyKind::Gamma: return boost::math::gamma_p(phi, phi * (1.0 + x));
    case FamilyKind::InverseGaussian:
      return inverse_gaussian_cdf(mu + mu * std::sqrt(mu) * x, mu, phi);
  }
  return 0.0;
}

std::pair<double, double> FamilySpec::log_density_derivatives(double x, double mu, double phi) const {
  require_phi(phi);
  if (!residual_support(mu).contains(x)) {
    fail(ErrorCode::DomainError, "log_density_derivatives: residual outside support");
  }
  switch (kind_) {
    case FamilyKind::Normal: return {-phi * x, -phi};
    case FamilyKind::Gamma: {
      const double s = 1.0 + x;
      return {(phi - 1.0) / s - phi, -(phi - 1.0) / (s * s)};
    }
    case FamilyKind::InverseGaussian: {
      const double h = 1e-5 * (1.0 + std::abs(x));
      const double lm = std::log(true_residual_density(x - h, mu, phi));
      const double l0 = std::log(true_residual_density(x, mu, phi));
      const double lp = std::log(true_residual_density(x + h, mu, phi));
      return {(lp - lm) / (2.0 * h), (lp - 2.0 * l0 + lm) / (h * h)};
    }
  }
  return {0.0, 0.0};
}

double FamilySpec::sample_response(double mu, double phi, RandomStream& rng) const {
  require_mean(mu);
  require_phi(phi);
  switch (kind_) {
    case FamilyKind::Normal: return mu + rng.standard_normal() / std::sqrt(phi);
    case FamilyKind::Gamma: return mu / phi * rng.standard_gamma(phi);
    case FamilyKind::InverseGaussian: {
      // Michael-Schucany-Haas with shape lambda = phi.
      const double lambda = phi;
      const double nu = rng.standard_normal();
      const double y = nu * nu;
      const double x = mu + mu * mu * y / (2.0 * lambda) -
                       mu / (2.0 * lambda) * std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
      const double u = rng.uniform();
      return u <= mu / (mu + x) ? x : mu * mu / x;
    }
  }
  return 0.0;
}

}  // namespace efnlm
