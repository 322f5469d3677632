#include "efnlm/residuals.hpp"

#include <cmath>
#include <limits>

#include "efnlm/error.hpp"

namespace efnlm {

namespace {

void check_index(const FitResult& fit, Eigen::Index i) {
  if (i < 0 || i >= fit.n()) {
    fail(ErrorCode::DimensionMismatch, "observation index " + std::to_string(i) + " out of range");
  }
}

VarianceTriple var_at(const FitResult& fit, Eigen::Index i) { return {fit.var(i), fit.var_d1(i), fit.var_d2(i)}; }
LinkDerivs link_at(const FitResult& fit, Eigen::Index i) { return {fit.mu_d1(i), fit.mu_d2(i)}; }

double fitted_bias_term(const FitResult& fit, Eigen::Index i) { return fit.local_model.row(i).dot(fit.bias); }

}  // namespace

Affine e_coefficients(const VarianceTriple& var, const LinkDerivs& link) {
  return {-link.d1 / std::sqrt(var.v), -0.5 * var.d1 * link.d1 / var.v};
}

Affine h_coefficients(const VarianceTriple& var, const LinkDerivs& link) {
  const double sv = std::sqrt(var.v);
  const double m1sq = link.d1 * link.d1;
  const double intercept = -link.d2 / sv + var.d1 * m1sq / (var.v * sv);
  const double slope = 0.25 * ((3.0 * var.d1 * var.d1 / (var.v * var.v) - 2.0 * var.d2 / var.v) * m1sq -
                               2.0 * var.d1 * link.d2 / var.v);
  return {intercept, slope};
}

Vector pearson(const FitResult& fit, const Vector& y) {
  if (y.size() != fit.n()) fail(ErrorCode::DimensionMismatch, "response length does not match the fit");
  return ((y - fit.mu).array() / fit.var.array().sqrt()).matrix();
}

double e_fun(const FitResult& fit, Eigen::Index i, double x) {
  check_index(fit, i);
  return e_coefficients(var_at(fit, i), link_at(fit, i))(x);
}

double h_fun(const FitResult& fit, Eigen::Index i, double x) {
  check_index(fit, i);
  return h_coefficients(var_at(fit, i), link_at(fit, i))(x);
}

double conditional_mean(const FitResult& fit, Eigen::Index i, double x) {
  check_index(fit, i);
  const double z = fit.hat.z_diag(i);
  const double d = fit.hat.d(i);
  const double lead = fit.w_sqrt(i) * z * x + fitted_bias_term(fit, i) + d / (2.0 * fit.phi);
  return lead * e_fun(fit, i, x) + z / (2.0 * fit.phi) * h_fun(fit, i, x);
}

double conditional_variance(const FitResult& fit, Eigen::Index i, double x) {
  check_index(fit, i);
  const double e = e_fun(fit, i, x);
  return fit.hat.z_diag(i) / fit.phi * e * e;
}

double rho(const ModelSpec& model, const FitResult& fit, Eigen::Index i, double x) {
  check_index(fit, i);
  if (!model.family.is_continuous()) {
    fail(ErrorCode::UnsupportedFamily, "the residual correction needs a continuous family");
  }
  const double mu = fit.mu(i);
  if (!model.family.residual_support(mu).contains(x)) {
    fail(ErrorCode::DomainError, "observation " + std::to_string(i + 1) + ": residual " + std::to_string(x) +
                                     " outside the true-residual support");
  }
  const double phi = fit.phi;
  const double z = fit.hat.z_diag(i);
  const double d = fit.hat.d(i);
  const double v = fit.var(i);
  const double e = e_fun(fit, i, x);
  const double h = h_fun(fit, i, x);
  const double theta = model.family.theta_of_mu(mu);
  const double log_slope = phi * std::sqrt(v) * theta + model.family.c_deriv(x, mu, phi);

  const double bracket = -fit.var_d1(i) * fit.mu_d1(i) * z / (2.0 * phi * v) - fitted_bias_term(fit, i) -
                         fit.w_sqrt(i) * z * x - d / (2.0 * phi);
  return e * bracket - z / (2.0 * phi) * h + z / (2.0 * phi) * e * e * log_slope;
}

CorrectedResiduals corrected(const ModelSpec& model, const FitResult& fit, const Vector& y) {
  const Vector r = pearson(fit, y);
  CorrectedResiduals out;
  out.values.resize(r.size());
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    try {
      out.values(i) = r(i) + rho(model, fit, i, r(i));
    } catch (const Error& e) {
      out.values(i) = std::numeric_limits<double>::quiet_NaN();
      out.errors.push_back({i, e.what()});
    }
  }
  return out;
}

double pearson_density_approx(const ModelSpec& model, const FitResult& fit, Eigen::Index i, double x) {
  check_index(fit, i);
  const double mu = fit.mu(i);
  if (!model.family.residual_support(mu).contains(x)) {
    fail(ErrorCode::DomainError, "pearson_density_approx: x outside the residual support");
  }
  const double phi = fit.phi;
  const double f = model.family.true_residual_density(x, mu, phi);
  const auto [l1, l2] = model.family.log_density_derivatives(x, mu, phi);

  const Affine e = e_coefficients(var_at(fit, i), link_at(fit, i));
  const Affine h = h_coefficients(var_at(fit, i), link_at(fit, i));
  const double z = fit.hat.z_diag(i);
  const double lead = fit.w_sqrt(i) * z * x + fitted_bias_term(fit, i) + fit.hat.d(i) / (2.0 * phi);

  const double ex = e(x);
  const double mean = lead * ex + z / (2.0 * phi) * h(x);
  const double mean_d1 = fit.w_sqrt(i) * z * ex + lead * e.slope + z / (2.0 * phi) * h.slope;
  const double var = z / phi * ex * ex;
  const double var_d1 = 2.0 * z / phi * ex * e.slope;
  const double var_d2 = 2.0 * z / phi * e.slope * e.slope;

  const double first = l1 * mean + mean_d1;
  const double second = (l2 + l1 * l1) * var + 2.0 * l1 * var_d1 + var_d2;
  return f * (1.0 - first + 0.5 * second);
}

Vector expected_pearson(const FitResult& fit) {
  const HatQuantities& hq = fit.hat;
  const Vector inner = (hq.j_diag.array() * hq.z_diag.array() + fit.w_sqrt.array() * hq.d.array()).matrix();
  const Vector projected = inner - hq.h * inner;
  return -projected / (2.0 * fit.phi);
}

Vector variance_pearson(const FitResult& fit) {
  const HatQuantities& hq = fit.hat;
  const double phi = fit.phi;
  const Vector jz = (hq.j_diag.array() * hq.z_diag.array()).matrix();
  const Vector second =
      (hq.q_diag.array() * (hq.h * jz).array() - hq.t_diag.array() * hq.z_diag.array()).matrix();
  const Vector wd = (fit.w_sqrt.array() * hq.d.array()).matrix();
  const Vector third = (hq.q_diag.array() * (hq.h * wd - wd).array()).matrix();
  return Vector::Constant(fit.n(), 1.0 / phi) + (second + third) / (2.0 * phi * phi);
}

Matrix covariance_pearson(const FitResult& fit) {
  Matrix sigma = -fit.hat.h / fit.phi;
  sigma = 0.5 * (sigma + sigma.transpose());
  sigma.diagonal() = variance_pearson(fit);
  return sigma;
}

namespace {

void require_positive_variances(const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v(i) > 0.0)) {
      fail(ErrorCode::NonPositiveVariance, "observation " + std::to_string(i + 1) +
                                               " has non-positive O(1/n) variance " + std::to_string(v(i)));
    }
  }
}

}  // namespace

Vector adjusted(const FitResult& fit, const Vector& y) {
  const Vector v = variance_pearson(fit);
  require_positive_variances(v);
  return ((pearson(fit, y) - expected_pearson(fit)).array() / v.array().sqrt()).matrix();
}

PcaResiduals pca_residuals(const FitResult& fit, const Vector& y) {
  const Matrix sigma = covariance_pearson(fit);
  const Vector v = sigma.diagonal();
  require_positive_variances(v);
  const Vector inv_sd = v.cwiseSqrt().cwiseInverse();

  PcaResiduals out;
  out.correlation = inv_sd.asDiagonal() * sigma * inv_sd.asDiagonal();
  out.correlation.diagonal().setOnes();
  EigenDecomposition eig = sym_eigen(out.correlation);
  const Vector adj = adjusted(fit, y);
  const double n = static_cast<double>(fit.n());
  const double p = static_cast<double>(fit.p());
  out.rotated = eig.eigenvectors.transpose() * adj;
  out.scaled = std::sqrt((n - p) / n) * out.rotated;
  out.eigenvalues = std::move(eig.eigenvalues);
  out.eigenvectors = std::move(eig.eigenvectors);
  out.truncation = fit.p();
  return out;
}

ResidualReport residual_report(const ModelSpec& model, const FitResult& fit, const Vector& y) {
  ResidualReport report;
  report.pearson = pearson(fit, y);
  CorrectedResiduals corr = corrected(model, fit, y);
  report.corrected = std::move(corr.values);
  report.errors = std::move(corr.errors);
  report.expected = expected_pearson(fit);
  report.covariance = covariance_pearson(fit);
  report.variances = report.covariance.diagonal();
  report.adjusted = adjusted(fit, y);
  PcaResiduals pca = pca_residuals(fit, y);
  report.correlation = std::move(pca.correlation);
  report.pca = std::move(pca.rotated);
  report.pca_scaled = std::move(pca.scaled);
  report.eigenvalues = std::move(pca.eigenvalues);
  report.eigenvectors = std::move(pca.eigenvectors);
  report.truncation = pca.truncation;
  return report;
}

}  // namespace efnlm
