#include <doctest.h>

#include <cmath>

#include "efnlm/error.hpp"
#include "efnlm/families.hpp"
#include "efnlm/links.hpp"

using namespace efnlm;

namespace {
const LinkKind kLinks[] = {LinkKind::Identity, LinkKind::Log, LinkKind::Reciprocal, LinkKind::InverseSquare};
}

TEST_SUITE("links") {
  TEST_CASE("tabulated inverse-link derivatives") {
    for (double mu : {0.3, 1.0, 2.7}) {
      const auto at = [&](LinkKind k) {
        const LinkSpec link(k);
        return link.link_derivs(link.eta_of_mu(mu));
      };
      CHECK(at(LinkKind::Identity).d1 == doctest::Approx(1.0));
      CHECK(at(LinkKind::Identity).d2 == doctest::Approx(0.0));
      CHECK(at(LinkKind::Log).d1 == doctest::Approx(mu));
      CHECK(at(LinkKind::Log).d2 == doctest::Approx(mu));
      CHECK(at(LinkKind::Reciprocal).d1 == doctest::Approx(-mu * mu));
      CHECK(at(LinkKind::Reciprocal).d2 == doctest::Approx(2 * mu * mu * mu));
      CHECK(at(LinkKind::InverseSquare).d1 == doctest::Approx(-std::pow(mu, 3) / 2));
      CHECK(at(LinkKind::InverseSquare).d2 == doctest::Approx(3 * std::pow(mu, 5) / 4));
    }
  }

  TEST_CASE("tabulated weights") {
    const FamilySpec gamma(FamilyKind::Gamma);
    const double mu = 1.9;
    const double v = gamma.variance_fn(mu).v;
    CHECK(weight(gamma, LinkSpec(LinkKind::Identity), mu) == doctest::Approx(1 / v));
    CHECK(weight(gamma, LinkSpec(LinkKind::Log), mu) == doctest::Approx(mu * mu / v));
    CHECK(weight(gamma, LinkSpec(LinkKind::Reciprocal), mu) == doctest::Approx(std::pow(mu, 4) / v));
    CHECK(weight(gamma, LinkSpec(LinkKind::InverseSquare), mu) == doctest::Approx(std::pow(mu, 6) / v / 4));
  }

  TEST_CASE("mu_of_eta inverts eta_of_mu and derivatives match finite differences") {
    for (LinkKind k : kLinks) {
      const LinkSpec link(k);
      for (double mu : {0.4, 1.3, 5.0}) {
        const double eta = link.eta_of_mu(mu);
        CHECK(link.mu_of_eta(eta) == doctest::Approx(mu).epsilon(1e-14));
        const double h = 1e-5 * std::max(1.0, std::abs(eta));
        const LinkDerivs d = link.link_derivs(eta);
        CHECK(d.d1 == doctest::Approx((link.mu_of_eta(eta + h) - link.mu_of_eta(eta - h)) / (2 * h)).epsilon(1e-7));
        const double fd2 = (link.link_derivs(eta + h).d1 - link.link_derivs(eta - h).d1) / (2 * h);
        CHECK(d.d2 == doctest::Approx(fd2).epsilon(1e-7));
      }
    }
  }

  TEST_CASE("domains and names") {
    CHECK_FALSE(LinkSpec(LinkKind::Reciprocal).in_eta_domain(0.0));
    CHECK_FALSE(LinkSpec(LinkKind::InverseSquare).in_eta_domain(-1.0));
    CHECK(LinkSpec(LinkKind::Log).in_eta_domain(-40.0));
    CHECK_FALSE(LinkSpec(LinkKind::Log).in_mu_domain(0.0));
    for (const char* name : {"identity", "log", "reciprocal", "inverse_square"}) {
      CHECK(LinkSpec::from_name(name).name() == name);
    }
    CHECK_THROWS_AS(LinkSpec::from_name("probit"), Error);
  }
}
