#pragma once

#include <string_view>

#include "efnlm/families.hpp"

namespace efnlm {

enum class LinkKind { Identity, Log, Reciprocal, InverseSquare };

/// Derivatives of the inverse link mu(eta).
struct LinkDerivs {
  double d1 = 0.0;  // mu'
  double d2 = 0.0;  // mu''
};

class LinkSpec {
 public:
  explicit LinkSpec(LinkKind kind) : kind_(kind) {}

  /// "identity", "log", "reciprocal" or "inverse_square".
  static LinkSpec from_name(std::string_view name);

  LinkKind kind() const { return kind_; }
  std::string_view name() const;

  bool in_eta_domain(double eta) const;
  bool in_mu_domain(double mu) const;

  double mu_of_eta(double eta) const;
  double eta_of_mu(double mu) const;
  LinkDerivs link_derivs(double eta) const;

 private:
  LinkKind kind_;
};

/// IRLS weight w = mu'^2 / V(mu), evaluated at eta = g(mu).
double weight(const FamilySpec& family, const LinkSpec& link, double mu);

}  // namespace efnlm
