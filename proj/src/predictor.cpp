#include "efnlm/predictor.hpp"

#include <cmath>

#include "efnlm/error.hpp"

namespace efnlm {

PredictorSpec PredictorSpec::linear(Eigen::Index q) {
  if (q < 1) fail(ErrorCode::ConfigError, "linear predictor needs at least one covariate");
  return PredictorSpec(PredictorKind::Linear, q, q);
}

PredictorSpec PredictorSpec::power_plus_linear() { return PredictorSpec(PredictorKind::PowerPlusLinear, 2, 3); }

PredictorSpec PredictorSpec::expression(Expression expr) {
  const auto q = static_cast<Eigen::Index>(expr.covariates().size());
  const auto p = static_cast<Eigen::Index>(expr.parameters().size());
  if (p < 1) fail(ErrorCode::ConfigError, "expression predictor has no parameters");
  PredictorSpec spec(PredictorKind::UserExpression, q, p);
  spec.expr_ = std::move(expr);
  return spec;
}

std::string PredictorSpec::describe() const {
  switch (kind_) {
    case PredictorKind::Linear: return "linear";
    case PredictorKind::PowerPlusLinear: return "power_plus_linear";
    case PredictorKind::UserExpression: return expr_->text();
  }
  return "unknown";
}

void PredictorSpec::check_shapes(const Matrix& x, const Vector& beta) const {
  if (x.cols() != q_) {
    fail(ErrorCode::DimensionMismatch, "predictor expects " + std::to_string(q_) + " covariates, got " +
                                           std::to_string(x.cols()));
  }
  if (beta.size() != p_) {
    fail(ErrorCode::DimensionMismatch, "predictor expects " + std::to_string(p_) + " parameters, got " +
                                           std::to_string(beta.size()));
  }
  if (!beta.allFinite()) fail(ErrorCode::DomainError, "predictor: non-finite parameter");
}

void PredictorSpec::validate_covariates(const Matrix& x) const {
  if (x.cols() != q_) {
    fail(ErrorCode::DimensionMismatch, "predictor expects " + std::to_string(q_) + " covariates, got " +
                                           std::to_string(x.cols()));
  }
  if (!x.allFinite()) fail(ErrorCode::DomainError, "covariates contain non-finite values");
  if (kind_ == PredictorKind::PowerPlusLinear) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!(x(i, 0) > 0.0)) {
        fail(ErrorCode::DomainError, "power_plus_linear needs x1 > 0; row " + std::to_string(i + 1) +
                                         " has x1 = " + std::to_string(x(i, 0)));
      }
    }
  }
}

Vector PredictorSpec::eval_eta(const Matrix& x, const Vector& beta) const {
  check_shapes(x, beta);
  const Eigen::Index n = x.rows();
  Vector eta(n);
  switch (kind_) {
    case PredictorKind::Linear:
      eta = x * beta;
      break;
    case PredictorKind::PowerPlusLinear:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = x(i, 0);
        if (x1 < 0.0 && beta(1) != std::nearbyint(beta(1))) {
          fail(ErrorCode::DomainError, "power_plus_linear: negative x1 with non-integer exponent at row " +
                                           std::to_string(i + 1));
        }
        eta(i) = beta(0) + std::pow(x1, beta(1)) + beta(2) * x(i, 1);
      }
      break;
    case PredictorKind::UserExpression:
      for (Eigen::Index i = 0; i < n; ++i) eta(i) = expr_->value(x.row(i).transpose(), beta);
      break;
  }
  if (!eta.allFinite()) fail(ErrorCode::DomainError, "predictor produced a non-finite value");
  return eta;
}

Matrix PredictorSpec::local_model_matrix(const Matrix& x, const Vector& beta) const {
  check_shapes(x, beta);
  const Eigen::Index n = x.rows();
  switch (kind_) {
    case PredictorKind::Linear:
      return x;
    case PredictorKind::PowerPlusLinear: {
      Matrix out(n, 3);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = x(i, 0);
        if (!(x1 > 0.0)) {
          fail(ErrorCode::DomainError, "power_plus_linear: gradient needs x1 > 0 at row " + std::to_string(i + 1));
        }
        out(i, 0) = 1.0;
        out(i, 1) = std::log(x1) * std::pow(x1, beta(1));
        out(i, 2) = x(i, 1);
      }
      return out;
    }
    case PredictorKind::UserExpression: {
      Matrix out(n, p_);
      for (Eigen::Index i = 0; i < n; ++i) out.row(i) = expr_->evaluate(x.row(i).transpose(), beta).grad.transpose();
      return out;
    }
  }
  return {};
}

std::vector<Matrix> PredictorSpec::predictor_hessians(const Matrix& x, const Vector& beta) const {
  check_shapes(x, beta);
  const Eigen::Index n = x.rows();
  std::vector<Matrix> out(static_cast<std::size_t>(n), Matrix::Zero(p_, p_));
  switch (kind_) {
    case PredictorKind::Linear:
      break;
    case PredictorKind::PowerPlusLinear:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = x(i, 0);
        if (!(x1 > 0.0)) {
          fail(ErrorCode::DomainError, "power_plus_linear: Hessian needs x1 > 0 at row " + std::to_string(i + 1));
        }
        const double lx = std::log(x1);
        out[static_cast<std::size_t>(i)](1, 1) = lx * lx * std::pow(x1, beta(1));
      }
      break;
    case PredictorKind::UserExpression:
      for (Eigen::Index i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = expr_->evaluate(x.row(i).transpose(), beta).hess;
      }
      break;
  }
  return out;
}

}  // namespace efnlm
