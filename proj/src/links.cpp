#include "efnlm/links.hpp"

#include <cmath>
#include <string>

#include "efnlm/error.hpp"

namespace efnlm {

LinkSpec LinkSpec::from_name(std::string_view name) {
  if (name == "identity") return LinkSpec(LinkKind::Identity);
  if (name == "log") return LinkSpec(LinkKind::Log);
  if (name == "reciprocal") return LinkSpec(LinkKind::Reciprocal);
  if (name == "inverse_square") return LinkSpec(LinkKind::InverseSquare);
  fail(ErrorCode::ConfigError, "unknown link '" + std::string(name) +
                                   "' (expected identity, log, reciprocal or inverse_square)");
}

std::string_view LinkSpec::name() const {
  switch (kind_) {
    case LinkKind::Identity: return "identity";
    case LinkKind::Log: return "log";
    case LinkKind::Reciprocal: return "reciprocal";
    case LinkKind::InverseSquare: return "inverse_square";
  }
  return "unknown";
}

bool LinkSpec::in_eta_domain(double eta) const {
  if (!std::isfinite(eta)) return false;
  switch (kind_) {
    case LinkKind::Identity: return true;
    case LinkKind::Log: return std::isfinite(std::exp(eta));
    case LinkKind::Reciprocal: return eta != 0.0;
    case LinkKind::InverseSquare: return eta > 0.0;
  }
  return false;
}

bool LinkSpec::in_mu_domain(double mu) const {
  if (!std::isfinite(mu)) return false;
  switch (kind_) {
    case LinkKind::Identity: return true;
    case LinkKind::Log: return mu > 0.0;
    case LinkKind::Reciprocal: return mu != 0.0;
    case LinkKind::InverseSquare: return mu > 0.0;
  }
  return false;
}

double LinkSpec::mu_of_eta(double eta) const {
  if (!in_eta_domain(eta)) {
    fail(ErrorCode::DomainError,
         "eta " + std::to_string(eta) + " outside the " + std::string(name()) + " link domain");
  }
  switch (kind_) {
    case LinkKind::Identity: return eta;
    case LinkKind::Log: return std::exp(eta);
    case LinkKind::Reciprocal: return 1.0 / eta;
    case LinkKind::InverseSquare: return 1.0 / std::sqrt(eta);
  }
  return 0.0;
}

double LinkSpec::eta_of_mu(double mu) const {
  if (!in_mu_domain(mu)) {
    fail(ErrorCode::DomainError,
         "mean " + std::to_string(mu) + " outside the " + std::string(name()) + " link domain");
  }
  switch (kind_) {
    case LinkKind::Identity: return mu;
    case LinkKind::Log: return std::log(mu);
    case LinkKind::Reciprocal: return 1.0 / mu;
    case LinkKind::InverseSquare: return 1.0 / (mu * mu);
  }
  return 0.0;
}

LinkDerivs LinkSpec::link_derivs(double eta) const {
  const double mu = mu_of_eta(eta);
  switch (kind_) {
    case LinkKind::Identity: return {1.0, 0.0};
    case LinkKind::Log: return {mu, mu};
    case LinkKind::Reciprocal: return {-mu * mu, 2.0 * mu * mu * mu};
    case LinkKind::InverseSquare: {
      const double mu3 = mu * mu * mu;
      return {-0.5 * mu3, 0.75 * mu3 * mu * mu};
    }
  }
  return {};
}

double weight(const FamilySpec& family, const LinkSpec& link, double mu) {
  const VarianceTriple var = family.variance_fn(mu);
  const LinkDerivs derivs = link.link_derivs(link.eta_of_mu(mu));
  return derivs.d1 * derivs.d1 / var.v;
}

}  // namespace efnlm
