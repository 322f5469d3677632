#pragma once

#include <string_view>
#include <vector>

#include "efnlm/families.hpp"
#include "efnlm/linalg.hpp"
#include "efnlm/links.hpp"
#include "efnlm/predictor.hpp"

namespace efnlm {

struct ModelSpec {
  FamilySpec family;
  LinkSpec link;
  PredictorSpec predictor;
};

enum class DispersionMethod { Pearson, MaximumLikelihood };

DispersionMethod dispersion_method_from_name(std::string_view name);
std::string_view to_string(DispersionMethod method);

struct FitOptions {
  DispersionMethod phi_method = DispersionMethod::Pearson;
  int max_iterations = 100;
  double tolerance = 1e-8;  // max-norm change in beta
  int max_halvings = 16;
  /// Use the observed-information (Newton) direction whenever it is
  /// positive definite; otherwise the scoring step. Same maximizer, but
  /// avoids the slow or cyclic scoring iterates of strongly curved models.
  bool newton_steps = true;
};

/// Diagonal and full hat-style quantities the residual formulas consume.
struct HatQuantities {
  Matrix z;       // X (X^T W X)^{-1} X^T
  Vector z_diag;
  Matrix h;       // W^{1/2} Z W^{1/2}
  Vector h_diag;
  Vector d;       // tr{X_i (X^T W X)^{-1}}
  Vector f_diag;  // mu' mu'' / V
  Vector j_diag;  // mu'' / sqrt(V)
  Vector q_diag;  // V^(1) / sqrt(V)
  Vector t_diag;  // 2 phi w + w V^(2) + V^(1) mu'' / V
};

/// Everything known about a model evaluated at one parameter vector.
///
/// Here W^{1/2} is the signed square root mu' / sqrt(V); its sign only
/// matters for links with a decreasing inverse.
struct FitResult {
  Vector beta;
  Vector eta;
  Vector mu;
  double phi = 1.0;
  DispersionMethod phi_method = DispersionMethod::Pearson;

  Vector var;       // V(mu)
  Vector var_d1;    // V^(1)
  Vector var_d2;    // V^(2)
  Vector mu_d1;     // mu'
  Vector mu_d2;     // mu''
  Vector w;         // mu'^2 / V
  Vector w_sqrt;    // mu' / sqrt(V)
  Vector p_diag;    // 1 / mu'

  Matrix local_model;                 // X tilde, n x p
  std::vector<Matrix> local_hessians; // X tilde_i, p x p each
  Matrix xtwx_inv;                    // (X^T W X)^{-1}
  Matrix k_inv;                       // phi^{-1} (X^T W X)^{-1}
  HatQuantities hat;
  Vector bias;                        // O(1/n) bias of beta hat

  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;  // max-norm of the score at beta

  Eigen::Index n() const { return mu.size(); }
  Eigen::Index p() const { return beta.size(); }
};

/// X^T W P (y - mu), the score with phi = 1.
Vector score(const ModelSpec& model, const Vector& beta, const Dataset& data);

/// sum_i y_i theta_i - b(theta_i): the beta-dependent part of the
/// log-likelihood at phi = 1.
double log_likelihood_kernel(const ModelSpec& model, const Vector& beta, const Dataset& data);

/// phi X^T W X. Throws RankDeficient when X tilde loses rank.
Matrix fisher_info(const ModelSpec& model, const Vector& beta, double phi, const Dataset& data);

/// Evaluates every fit quantity at fixed (beta, phi) without iterating.
FitResult evaluate_fit(const ModelSpec& model, const Dataset& data, const Vector& beta, double phi,
                       DispersionMethod phi_method = DispersionMethod::Pearson);

/// Same fit with a different precision; rescales K^{-1}, T and the bias.
FitResult with_dispersion(const FitResult& fit, double phi);

/// Maximum likelihood by iteratively reweighted least squares.
///
/// Converged when the max-norm change in beta drops below
/// `options.tolerance` within `options.max_iterations`. A step that leaves
/// the domain, inflates the score norm more than tenfold or lowers the
/// likelihood is halved (up to `options.max_halvings` times). Returns the last iterate with
/// `converged == false` when the budget runs out. The precision is
/// estimated with `options.phi_method` and all hat quantities and the bias
/// are populated.
FitResult irls_fit(const ModelSpec& model, const Dataset& data, const Vector& beta_init,
                   const FitOptions& options = {});

/// Starting values: least squares of g(y) on closed-form columns where the
/// predictor allows it (linear, power_plus_linear), 0.1 everywhere otherwise.
Vector heuristic_initial_beta(const ModelSpec& model, const Dataset& data);

/// Pearson: (n - p) / sum (y - mu)^2 / V. Maximum likelihood: profile
/// likelihood in phi at the fitted means (closed form for normal and
/// inverse Gaussian, safeguarded Newton on log phi for gamma).
/// Throws DegenerateResiduals when the fit interpolates the data.
double estimate_dispersion(const ModelSpec& model, const FitResult& fit, const Dataset& data,
                           DispersionMethod method);

HatQuantities hat_quantities(const FitResult& fit);

/// (X^T W X)^{-1} X^T W (xi1 + xi2) with xi1 = -(2 phi)^{-1} Z_d W^{-1} F 1
/// and xi2 = -(2 phi)^{-1} D 1.
Vector bias_beta(const FitResult& fit);

}  // namespace efnlm
