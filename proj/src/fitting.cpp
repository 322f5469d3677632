#include "efnlm/fitting.hpp"

#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <optional>
#include <string>

#include "efnlm/error.hpp"

namespace efnlm {

namespace {

struct LinearizedState {
  Vector eta, mu, var, var_d1, var_d2, mu_d1, mu_d2, w, w_sqrt;
  Matrix local_model;
};

LinearizedState linearize(const ModelSpec& model, const Dataset& data, const Vector& beta) {
  LinearizedState s;
  s.eta = model.predictor.eval_eta(data.covariates, beta);
  const Eigen::Index n = s.eta.size();
  s.mu.resize(n);
  s.var.resize(n);
  s.var_d1.resize(n);
  s.var_d2.resize(n);
  s.mu_d1.resize(n);
  s.mu_d2.resize(n);
  s.w.resize(n);
  s.w_sqrt.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = s.eta(i);
    if (!model.link.in_eta_domain(eta)) {
      fail(ErrorCode::DomainError, "observation " + std::to_string(i + 1) + ": eta = " + std::to_string(eta) +
                                       " outside the " + std::string(model.link.name()) + " link domain");
    }
    const double mu = model.link.mu_of_eta(eta);
    if (!model.family.in_mean_domain(mu)) {
      fail(ErrorCode::DomainError, "observation " + std::to_string(i + 1) + ": mean " + std::to_string(mu) +
                                       " outside the " + std::string(model.family.name()) + " mean domain");
    }
    const LinkDerivs ld = model.link.link_derivs(eta);
    const VarianceTriple vt = model.family.variance_fn(mu);
    if (ld.d1 == 0.0) fail(ErrorCode::DomainError, "inverse link has zero slope");
    s.mu(i) = mu;
    s.var(i) = vt.v;
    s.var_d1(i) = vt.d1;
    s.var_d2(i) = vt.d2;
    s.mu_d1(i) = ld.d1;
    s.mu_d2(i) = ld.d2;
    s.w(i) = ld.d1 * ld.d1 / vt.v;
    s.w_sqrt(i) = ld.d1 / std::sqrt(vt.v);
  }
  s.local_model = model.predictor.local_model_matrix(data.covariates, beta);
  return s;
}

void check_data(const ModelSpec& model, const Dataset& data) {
  const Eigen::Index n = data.y.size();
  if (data.covariates.rows() != n) {
    fail(ErrorCode::DimensionMismatch, "dataset has " + std::to_string(data.covariates.rows()) +
                                           " covariate rows but " + std::to_string(n) + " responses");
  }
  if (n <= model.predictor.parameter_dim()) {
    fail(ErrorCode::RankDeficient, "need more observations (" + std::to_string(n) + ") than parameters (" +
                                       std::to_string(model.predictor.parameter_dim()) + ")");
  }
}

double kernel_from_state(const ModelSpec& model, const LinearizedState& s, const Vector& y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.mu.size(); ++i) {
    const double theta = model.family.theta_of_mu(s.mu(i));
    total += y(i) * theta - model.family.cumulant(theta);
  }
  return total;
}

Vector score_from_state(const LinearizedState& s, const Vector& y) {
  // X^T W P (y - mu), W P = diag(mu' / V)
  const Vector weighted = (s.mu_d1.array() / s.var.array() * (y - s.mu).array()).matrix();
  return s.local_model.transpose() * weighted;
}

Matrix weighted_cross_product(const LinearizedState& s) {
  return s.local_model.transpose() * s.w.asDiagonal() * s.local_model;
}

// (X^T W X)^{-1}, with a pivoted-QR rank check on W^{1/2} X.
Matrix information_inverse(const LinearizedState& s) {
  const Matrix scaled = s.w_sqrt.asDiagonal() * s.local_model;
  Eigen::ColPivHouseholderQR<Matrix> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < scaled.cols()) {
    fail(ErrorCode::RankDeficient, "local model matrix has rank " + std::to_string(qr.rank()) + " < p = " +
                                       std::to_string(scaled.cols()));
  }
  try {
    return inverse_spd(weighted_cross_product(s));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotPositiveDefinite) fail(ErrorCode::RankDeficient, e.what());
    throw;
  }
}

// Newton direction from the observed information, when it is positive definite:
//   X^T W X - sum_i (y_i - mu_i) [(mu''/V - mu'^2 V'/V^2) x_i x_i^T + (mu'/V) X_i].
std::optional<Vector> newton_direction(const ModelSpec& model, const Dataset& data, const Vector& beta,
                                       const LinearizedState& s, const Vector& u) {
  Matrix observed = weighted_cross_product(s);
  const std::vector<Matrix> hessians = model.predictor.predictor_hessians(data.covariates, beta);
  for (Eigen::Index i = 0; i < s.mu.size(); ++i) {
    const double r = data.y(i) - s.mu(i);
    const double curvature = s.mu_d2(i) / s.var(i) - s.mu_d1(i) * s.mu_d1(i) * s.var_d1(i) / (s.var(i) * s.var(i));
    const auto xi = s.local_model.row(i).transpose();
    observed -= r * curvature * xi * xi.transpose();
    observed -= r * s.mu_d1(i) / s.var(i) * hessians[static_cast<std::size_t>(i)];
  }
  const Eigen::LLT<Matrix> llt(0.5 * (observed + observed.transpose()));
  if (llt.info() != Eigen::Success) return std::nullopt;
  Vector step = llt.solve(u);
  if (!step.allFinite()) return std::nullopt;
  return step;
}

void finalize(FitResult& fit) {
  fit.k_inv = fit.xtwx_inv / fit.phi;
  fit.hat = hat_quantities(fit);
  fit.bias = bias_beta(fit);
}

double pearson_chi2(const FitResult& fit, const Dataset& data, double* scale) {
  double chi2 = 0.0;
  double ref = 0.0;
  for (Eigen::Index i = 0; i < fit.n(); ++i) {
    const double r = data.y(i) - fit.mu(i);
    chi2 += r * r / fit.var(i);
    ref += data.y(i) * data.y(i) / fit.var(i) + 1.0;
  }
  if (scale) *scale = ref;
  return chi2;
}

double solve_gamma_precision(double s) {
  // log(phi) - digamma(phi) = s, decreasing in phi; Newton on u = log(phi)
  // kept inside a shrinking bracket.
  auto g = [s](double u) { return u - boost::math::digamma(std::exp(u)) - s; };
  double lo = -1.0;
  double hi = 1.0;
  while (g(lo) < 0.0) lo -= 2.0;
  while (g(hi) > 0.0) hi += 2.0;
  double u = std::log((3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s));
  if (!(u > lo && u < hi)) u = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double gu = g(u);
    if (gu > 0.0) lo = u; else hi = u;
    const double phi = std::exp(u);
    const double slope = 1.0 - phi * boost::math::trigamma(phi);
    double next = u - gu / slope;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) < 1e-13 * std::max(1.0, std::abs(u))) return std::exp(next);
    u = next;
  }
  return std::exp(u);
}

}  // namespace

DispersionMethod dispersion_method_from_name(std::string_view name) {
  if (name == "pearson") return DispersionMethod::Pearson;
  if (name == "mle") return DispersionMethod::MaximumLikelihood;
  fail(ErrorCode::ConfigError, "unknown dispersion method '" + std::string(name) + "' (expected pearson or mle)");
}

std::string_view to_string(DispersionMethod method) {
  return method == DispersionMethod::Pearson ? "pearson" : "mle";
}

Vector score(const ModelSpec& model, const Vector& beta, const Dataset& data) {
  check_data(model, data);
  return score_from_state(linearize(model, data, beta), data.y);
}

double log_likelihood_kernel(const ModelSpec& model, const Vector& beta, const Dataset& data) {
  check_data(model, data);
  return kernel_from_state(model, linearize(model, data, beta), data.y);
}

Matrix fisher_info(const ModelSpec& model, const Vector& beta, double phi, const Dataset& data) {
  check_data(model, data);
  const LinearizedState s = linearize(model, data, beta);
  information_inverse(s);  // rank check
  return phi * weighted_cross_product(s);
}

FitResult evaluate_fit(const ModelSpec& model, const Dataset& data, const Vector& beta, double phi,
                       DispersionMethod phi_method) {
  check_data(model, data);
  if (!(phi > 0.0) || !std::isfinite(phi)) fail(ErrorCode::DomainError, "precision phi must be positive");
  LinearizedState s = linearize(model, data, beta);
  FitResult fit;
  fit.beta = beta;
  fit.phi = phi;
  fit.phi_method = phi_method;
  fit.xtwx_inv = information_inverse(s);
  fit.score_norm = score_from_state(s, data.y).lpNorm<Eigen::Infinity>();
  fit.eta = std::move(s.eta);
  fit.mu = std::move(s.mu);
  fit.var = std::move(s.var);
  fit.var_d1 = std::move(s.var_d1);
  fit.var_d2 = std::move(s.var_d2);
  fit.mu_d1 = std::move(s.mu_d1);
  fit.mu_d2 = std::move(s.mu_d2);
  fit.w = std::move(s.w);
  fit.w_sqrt = std::move(s.w_sqrt);
  fit.p_diag = fit.mu_d1.cwiseInverse();
  fit.local_model = std::move(s.local_model);
  fit.local_hessians = model.predictor.predictor_hessians(data.covariates, beta);
  finalize(fit);
  return fit;
}

FitResult with_dispersion(const FitResult& fit, double phi) {
  if (!(phi > 0.0) || !std::isfinite(phi)) fail(ErrorCode::DomainError, "precision phi must be positive");
  FitResult out = fit;
  out.phi = phi;
  finalize(out);
  return out;
}

FitResult irls_fit(const ModelSpec& model, const Dataset& data, const Vector& beta_init, const FitOptions& options) {
  check_data(model, data);
  if (beta_init.size() != model.predictor.parameter_dim()) {
    fail(ErrorCode::DimensionMismatch, "initial beta has " + std::to_string(beta_init.size()) +
                                           " entries, predictor needs " +
                                           std::to_string(model.predictor.parameter_dim()));
  }
  Vector beta = beta_init;
  LinearizedState state = linearize(model, data, beta);
  Vector u = score_from_state(state, data.y);
  double loglik = kernel_from_state(model, state, data.y);
  int iterations = 0;
  bool converged = false;

  while (iterations < options.max_iterations) {
    ++iterations;
    Vector step = information_inverse(state) * u;
    if (options.newton_steps) {
      if (auto newton = newton_direction(model, data, beta, state, u)) step = std::move(*newton);
    }
    const double u_norm = u.lpNorm<Eigen::Infinity>();

    double scale = 1.0;
    bool accepted = false;
    Vector candidate;
    LinearizedState next;
    Vector next_u;
    double next_loglik = loglik;
    for (int halving = 0; halving <= options.max_halvings; ++halving, scale *= 0.5) {
      candidate = beta + scale * step;
      try {
        next = linearize(model, data, candidate);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::DomainError) continue;
        throw;
      }
      next_u = score_from_state(next, data.y);
      if (!next_u.allFinite()) continue;
      if (next_u.lpNorm<Eigen::Infinity>() > 10.0 * u_norm && u_norm > 0.0) continue;
      // ascent on the likelihood rules out two-cycles of the scoring step
      next_loglik = kernel_from_state(model, next, data.y);
      if (!(next_loglik >= loglik - 1e-12 * (1.0 + std::abs(loglik)))) continue;
      accepted = true;
      break;
    }
    if (!accepted) {
      fail(ErrorCode::DomainError, "IRLS step left the model domain after " + std::to_string(options.max_halvings) +
                                       " halvings (iteration " + std::to_string(iterations) + ")");
    }
    const double change = (candidate - beta).lpNorm<Eigen::Infinity>();
    beta = std::move(candidate);
    state = std::move(next);
    u = std::move(next_u);
    loglik = next_loglik;
    if (change < options.tolerance) {
      converged = true;
      break;
    }
  }

  FitResult fit = evaluate_fit(model, data, beta, 1.0, options.phi_method);
  fit.iterations = iterations;
  fit.converged = converged;
  fit.phi = estimate_dispersion(model, fit, data, options.phi_method);
  finalize(fit);
  return fit;
}

Vector heuristic_initial_beta(const ModelSpec& model, const Dataset& data) {
  const Eigen::Index n = data.y.size();
  const PredictorSpec& pred = model.predictor;
  if (pred.kind() == PredictorKind::UserExpression) return Vector::Constant(pred.parameter_dim(), 0.1);

  // working response g(y), with y nudged into the link's mean domain
  const double ybar = data.y.mean();
  Vector gy(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double yi = data.y(i);
    if (!model.link.in_mu_domain(yi) || !model.family.in_mean_domain(yi)) {
      yi = std::max(std::abs(ybar), 1e-3);
    }
    gy(i) = model.link.eta_of_mu(yi);
  }
  if (pred.kind() == PredictorKind::Linear) {
    return data.covariates.colPivHouseholderQr().solve(gy);
  }
  // power_plus_linear with the exponent started at one
  Matrix design(n, 2);
  design.col(0).setOnes();
  design.col(1) = data.covariates.col(1);
  const Vector rhs = gy - data.covariates.col(0);
  const Vector coef = design.colPivHouseholderQr().solve(rhs);
  Vector beta(3);
  beta << coef(0), 1.0, coef(1);
  return beta;
}

double estimate_dispersion(const ModelSpec& model, const FitResult& fit, const Dataset& data,
                           DispersionMethod method) {
  const Eigen::Index n = fit.n();
  const Eigen::Index p = fit.p();
  double scale = 0.0;
  const double chi2 = pearson_chi2(fit, data, &scale);
  if (!(chi2 > 1e-24 * scale)) {
    fail(ErrorCode::DegenerateResiduals, "Pearson statistic is zero: the fit interpolates the data");
  }
  if (method == DispersionMethod::Pearson) return static_cast<double>(n - p) / chi2;

  switch (model.family.kind()) {
    case FamilyKind::Normal:
      return static_cast<double>(n) / chi2;
    case FamilyKind::InverseGaussian: {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double r = data.y(i) - fit.mu(i);
        total += r * r / (fit.mu(i) * fit.mu(i) * data.y(i));
      }
      return static_cast<double>(n) / total;
    }
    case FamilyKind::Gamma: {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double ratio = data.y(i) / fit.mu(i);
        total += std::log(ratio) - (ratio - 1.0);
      }
      const double s = -total / static_cast<double>(n);
      if (!(s > 0.0)) {
        fail(ErrorCode::DegenerateResiduals, "gamma deviance is zero: the fit interpolates the data");
      }
      return solve_gamma_precision(s);
    }
  }
  return static_cast<double>(n - p) / chi2;
}

HatQuantities hat_quantities(const FitResult& fit) {
  const Matrix& x = fit.local_model;
  const Matrix& a = fit.xtwx_inv;
  const Eigen::Index n = fit.n();
  HatQuantities hq;
  hq.z = x * a * x.transpose();
  hq.z = 0.5 * (hq.z + hq.z.transpose());
  hq.z_diag = hq.z.diagonal();
  hq.h = fit.w_sqrt.asDiagonal() * hq.z * fit.w_sqrt.asDiagonal();
  hq.h_diag = hq.h.diagonal();
  hq.d.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    hq.d(i) = (fit.local_hessians[static_cast<std::size_t>(i)] * a).trace();
  }
  const auto sqrt_v = fit.var.array().sqrt();
  hq.f_diag = (fit.mu_d1.array() * fit.mu_d2.array() / fit.var.array()).matrix();
  hq.j_diag = (fit.mu_d2.array() / sqrt_v).matrix();
  hq.q_diag = (fit.var_d1.array() / sqrt_v).matrix();
  hq.t_diag = (2.0 * fit.phi * fit.w.array() + fit.w.array() * fit.var_d2.array() +
               fit.var_d1.array() * fit.mu_d2.array() / fit.var.array())
                  .matrix();
  return hq;
}

Vector bias_beta(const FitResult& fit) {
  const double half_inv_phi = 1.0 / (2.0 * fit.phi);
  const Vector xi1 = (-half_inv_phi * fit.hat.z_diag.array() * fit.hat.f_diag.array() / fit.w.array()).matrix();
  const Vector xi2 = -half_inv_phi * fit.hat.d;
  return fit.xtwx_inv * (fit.local_model.transpose() * (fit.w.asDiagonal() * (xi1 + xi2)));
}

}  // namespace efnlm
