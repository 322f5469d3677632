#pragma once

#include <optional>
#include <string>
#include <vector>

#include "efnlm/expression.hpp"
#include "efnlm/linalg.hpp"

namespace efnlm {

/// Covariates (n x q, one row per observation) and responses.
struct Dataset {
  Matrix covariates;
  Vector y;
  std::vector<std::string> covariate_names;

  Eigen::Index size() const { return y.size(); }
};

enum class PredictorKind { Linear, PowerPlusLinear, UserExpression };

/// Nonlinear predictor eta_i = f(x_i; beta).
///
///   Linear           f = x^T beta                       (q = p)
///   PowerPlusLinear  f = b0 + x1^b1 + b2 x2              (q = 2, p = 3)
///   UserExpression   parsed arithmetic expression; derivatives by jets
class PredictorSpec {
 public:
  static PredictorSpec linear(Eigen::Index q);
  static PredictorSpec power_plus_linear();
  static PredictorSpec expression(Expression expr);

  PredictorKind kind() const { return kind_; }
  Eigen::Index covariate_dim() const { return q_; }
  Eigen::Index parameter_dim() const { return p_; }
  const std::optional<Expression>& user_expression() const { return expr_; }
  /// "linear", "power_plus_linear" or the expression text.
  std::string describe() const;

  /// Load-time covariate checks (PowerPlusLinear needs x1 > 0).
  void validate_covariates(const Matrix& x) const;

  Vector eval_eta(const Matrix& x, const Vector& beta) const;
  /// Row i is the gradient of f(x_i; beta) with respect to beta.
  Matrix local_model_matrix(const Matrix& x, const Vector& beta) const;
  /// Per-observation p x p Hessians of f(x_i; beta).
  std::vector<Matrix> predictor_hessians(const Matrix& x, const Vector& beta) const;

 private:
  PredictorSpec(PredictorKind kind, Eigen::Index q, Eigen::Index p) : kind_(kind), q_(q), p_(p) {}
  void check_shapes(const Matrix& x, const Vector& beta) const;

  PredictorKind kind_;
  Eigen::Index q_;
  Eigen::Index p_;
  std::optional<Expression> expr_;
};

}  // namespace efnlm
