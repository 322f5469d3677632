#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "efnlm/linalg.hpp"

namespace efnlm {

/// Value with gradient and Hessian with respect to the model parameters.
/// Arithmetic on jets propagates exact second derivatives (forward mode).
struct Jet {
  double value = 0.0;
  Vector grad;
  Matrix hess;

  static Jet constant(double v, Eigen::Index p);
  static Jet variable(double v, Eigen::Index index, Eigen::Index p);
  bool is_constant() const;
};

Jet operator+(const Jet& a, const Jet& b);
Jet operator-(const Jet& a, const Jet& b);
Jet operator-(const Jet& a);
Jet operator*(const Jet& a, const Jet& b);
Jet operator/(const Jet& a, const Jet& b);
Jet pow(const Jet& base, const Jet& exponent);
Jet exp(const Jet& a);
Jet log(const Jet& a);

/// Arithmetic expression over named covariates and parameters.
///
/// Grammar:
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?          (right associative)
///   primary := number | name | name '(' expr ')' | '(' expr ')'
/// Functions: log, exp. Names are [A-Za-z_][A-Za-z0-9_.]*.
class Expression {
 public:
  struct Node;

  /// Parses `text`. Every name must be listed in `covariates` or
  /// `parameters` (not both); ParseError otherwise.
  static Expression parse(std::string_view text, std::vector<std::string> covariates,
                          std::vector<std::string> parameters);

  /// Names that are neither known functions nor numbers, in order of
  /// first appearance. Useful for inferring parameter lists.
  static std::vector<std::string> identifiers(std::string_view text);

  const std::string& text() const { return text_; }
  const std::vector<std::string>& covariates() const { return covariates_; }
  const std::vector<std::string>& parameters() const { return parameters_; }

  /// Evaluates at one observation; the jet is taken over the parameters.
  Jet evaluate(const Eigen::Ref<const Vector>& covariates, const Eigen::Ref<const Vector>& beta) const;
  double value(const Eigen::Ref<const Vector>& covariates, const Eigen::Ref<const Vector>& beta) const;

 private:
  std::string text_;
  std::vector<std::string> covariates_;
  std::vector<std::string> parameters_;
  std::shared_ptr<const Node> root_;
};

}  // namespace efnlm
