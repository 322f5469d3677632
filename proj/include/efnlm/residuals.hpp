#pragma once

#include <string>
#include <vector>

#include "efnlm/fitting.hpp"

namespace efnlm {

/// a + b x
struct Affine {
  double intercept = 0.0;
  double slope = 0.0;

  double operator()(double x) const { return intercept + slope * x; }
};

/// e_i(x) from V, its derivatives and the inverse-link derivatives:
///   -V^{-1/2} mu' - (1/2) V^{-1} V^(1) mu' x
Affine e_coefficients(const VarianceTriple& var, const LinkDerivs& link);

/// h_i(x):
///   -V^{-1/2} mu'' + V^{-3/2} V^(1) mu'^2
///   + (1/4) {(3 V^{-2} V^(1)^2 - 2 V^{-1} V^(2)) mu'^2 - 2 V^{-1} V^(1) mu''} x
Affine h_coefficients(const VarianceTriple& var, const LinkDerivs& link);

Vector pearson(const FitResult& fit, const Vector& y);

double e_fun(const FitResult& fit, Eigen::Index i, double x);
double h_fun(const FitResult& fit, Eigen::Index i, double x);

/// Conditional mean of R_i - eps_i given eps_i = x, to O(1/n).
double conditional_mean(const FitResult& fit, Eigen::Index i, double x);
/// Conditional variance of R_i - eps_i given eps_i = x: (z_ii / phi) e_i(x)^2.
double conditional_variance(const FitResult& fit, Eigen::Index i, double x);

/// Correction rho_i(x) such that R_i + rho_i(R_i) matches the distribution
/// of the true residual eps_i to O(1/n):
///
///   rho_i(x) = e_i(x) {-(2 phi)^{-1} V^{-1} V^(1) mu' z_ii - (X B)_i
///                      - w_i^{1/2} z_ii x - d_i / (2 phi)}
///              - z_ii / (2 phi) h_i(x)
///              + z_ii / (2 phi) e_i(x)^2 {phi sqrt(V) theta_i + c'(x)}
///
/// where c'(x) = d/dx c(sqrt(V) x + mu, phi). DomainError when x is
/// outside the residual support.
double rho(const ModelSpec& model, const FitResult& fit, Eigen::Index i, double x);

struct ObservationError {
  Eigen::Index index = 0;
  std::string message;
};

struct CorrectedResiduals {
  Vector values;  // NaN where the correction failed
  std::vector<ObservationError> errors;
};

/// R'_i = R_i + rho_i(R_i); failures are recorded per observation.
CorrectedResiduals corrected(const ModelSpec& model, const FitResult& fit, const Vector& y);

/// O(1/n) density of R_i:
///   f_eps - d{f_eps theta_x}/dx + (1/2) d^2{f_eps phi_x^2}/dx^2.
double pearson_density_approx(const ModelSpec& model, const FitResult& fit, Eigen::Index i, double x);

/// r = -(2 phi)^{-1} (I - H)(J z + W^{1/2} d).
Vector expected_pearson(const FitResult& fit);
/// v = phi^{-1} 1 + (2 phi^2)^{-1} (Q H J - T) z + (2 phi^2)^{-1} Q (H - I) W^{1/2} d.
Vector variance_pearson(const FitResult& fit);
/// Diagonal v, off-diagonal -h_ij / phi.
Matrix covariance_pearson(const FitResult& fit);

/// (R_i - r_i) / sqrt(v_i). NonPositiveVariance if some v_i <= 0.
Vector adjusted(const FitResult& fit, const Vector& y);

struct PcaResiduals {
  Vector rotated;      // E^T R*
  Vector scaled;       // sqrt((n - p) / n) E^T R*
  Vector eigenvalues;  // of the correlation matrix, descending
  Matrix eigenvectors;
  Matrix correlation;
  Eigen::Index truncation = 0;  // trailing coordinates to disregard (= p)
};

PcaResiduals pca_residuals(const FitResult& fit, const Vector& y);

struct ResidualReport {
  Vector pearson;
  Vector corrected;
  Vector expected;
  Vector variances;
  Matrix covariance;
  Matrix correlation;
  Vector adjusted;
  Vector pca;
  Vector pca_scaled;
  Vector eigenvalues;
  Matrix eigenvectors;
  Eigen::Index truncation = 0;
  std::vector<ObservationError> errors;
};

ResidualReport residual_report(const ModelSpec& model, const FitResult& fit, const Vector& y);

}  // namespace efnlm
