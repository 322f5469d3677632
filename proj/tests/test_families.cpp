#include <doctest.h>

#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/sinh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>

#include "efnlm/error.hpp"
#include "efnlm/families.hpp"

using namespace efnlm;

namespace {

const double kPi = boost::math::constants::pi<double>();

// Response densities written out from their textbook forms.
double response_density(FamilyKind kind, double y, double mu, double phi) {
  switch (kind) {
    case FamilyKind::Normal:
      return std::sqrt(phi / (2 * kPi)) * std::exp(-phi * (y - mu) * (y - mu) / 2);
    case FamilyKind::Gamma:
      return std::pow(phi * y, phi - 1) * phi / (std::tgamma(phi) * std::pow(mu, phi)) * std::exp(-phi * y / mu);
    case FamilyKind::InverseGaussian:
      return std::sqrt(phi / (2 * kPi * y * y * y)) * std::exp(-phi * (y - mu) * (y - mu) / (2 * mu * mu * y));
  }
  return 0.0;
}

double integrate_density(const FamilySpec& fam, double mu, double phi, double lo, double hi) {
  const auto f = [&](double x) { return fam.true_residual_density(x, mu, phi); };
  if (std::isinf(lo) && std::isinf(hi)) {
    boost::math::quadrature::sinh_sinh<double> q;
    return q.integrate(f);
  }
  boost::math::quadrature::exp_sinh<double> q;
  return q.integrate([&](double t) { return f(lo + t); }, 0.0, std::numeric_limits<double>::infinity());
  (void)hi;
}

const FamilyKind kKinds[] = {FamilyKind::Normal, FamilyKind::Gamma, FamilyKind::InverseGaussian};

}  // namespace

TEST_SUITE("families") {
  TEST_CASE("names round-trip and unknown names are config errors") {
    for (const char* name : {"normal", "gamma", "inverse_gaussian"}) CHECK(FamilySpec::from_name(name).name() == name);
    try {
      FamilySpec::from_name("poisson");
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ConfigError);
    }
  }

  TEST_CASE("variance function derivatives match finite differences") {
    for (FamilyKind kind : kKinds) {
      const FamilySpec fam(kind);
      for (double mu : {0.3, 1.0, 4.5}) {
        const double h = 1e-5 * mu;
        const VarianceTriple v = fam.variance_fn(mu);
        const VarianceTriple vp = fam.variance_fn(mu + h);
        const VarianceTriple vm = fam.variance_fn(mu - h);
        CHECK(v.d1 == doctest::Approx((vp.v - vm.v) / (2 * h)).epsilon(1e-7));
        CHECK(v.d2 == doctest::Approx((vp.d1 - vm.d1) / (2 * h)).epsilon(1e-7));
      }
    }
  }

  TEST_CASE("cumulant derivative is the mean and V = dmu/dtheta") {
    for (FamilyKind kind : kKinds) {
      const FamilySpec fam(kind);
      for (double mu : {0.4, 1.0, 3.0}) {
        const double theta = fam.theta_of_mu(mu);
        const double h = 1e-6 * std::max(1.0, std::abs(theta));
        const double db = (fam.cumulant(theta + h) - fam.cumulant(theta - h)) / (2 * h);
        CHECK(db == doctest::Approx(mu).epsilon(1e-7));
        const double dmu = 1e-6 * mu;
        const double dtheta = (fam.theta_of_mu(mu + dmu) - fam.theta_of_mu(mu - dmu)) / (2 * dmu);
        CHECK(1.0 / dtheta == doctest::Approx(fam.variance_fn(mu).v).epsilon(1e-7));
      }
    }
  }

  TEST_CASE("true-residual density is the transformed response density") {
    for (FamilyKind kind : kKinds) {
      const FamilySpec fam(kind);
      for (double mu : {0.5, 2.0, 6.0}) {
        for (double phi : {0.7, 4.0}) {
          const double sd = std::sqrt(fam.variance_fn(mu).v);
          for (double x : {-0.3, 0.0, 0.4, 1.7}) {
            if (!fam.residual_support(mu).contains(x)) continue;
            const double expected = sd * response_density(kind, sd * x + mu, mu, phi);
            CHECK(fam.true_residual_density(x, mu, phi) == doctest::Approx(expected).epsilon(1e-12));
          }
        }
      }
    }
  }

  TEST_CASE("true-residual densities integrate to one with mean 0 and variance 1/phi") {
    for (FamilyKind kind : kKinds) {
      const FamilySpec fam(kind);
      for (double mu : {0.5, 3.0}) {
        for (double phi : {0.8, 4.0, 20.0}) {
          const ResidualSupport s = fam.residual_support(mu);
          CAPTURE(fam.name());
          CAPTURE(mu);
          CAPTURE(phi);
          CHECK(std::abs(integrate_density(fam, mu, phi, s.lower, s.upper) - 1.0) <= 1e-6);
          boost::math::quadrature::exp_sinh<double> q;
          if (std::isfinite(s.lower)) {
            const auto moment = [&](int k) {
              return q.integrate(
                  [&](double t) { return std::pow(s.lower + t, k) * fam.true_residual_density(s.lower + t, mu, phi); },
                  0.0, std::numeric_limits<double>::infinity());
            };
            CHECK(std::abs(moment(1)) < 1e-8);
            CHECK(moment(2) == doctest::Approx(1.0 / phi).epsilon(1e-7));
          }
        }
      }
    }
  }

  TEST_CASE("cdf is the integral of the density") {
    for (FamilyKind kind : kKinds) {
      const FamilySpec fam(kind);
      const double mu = 1.7;
      const double phi = 3.0;
      const ResidualSupport s = fam.residual_support(mu);
      double lo = std::isfinite(s.lower) ? s.lower : -12.0;
      double acc = 0.0;
      // composite Simpson from the lower end
      const int steps = 20000;
      const double hi = 2.5;
      const double h = (hi - lo) / steps;
      for (int k = 0; k < steps; ++k) {
        const double a = lo + k * h;
        acc += h / 6 * (fam.true_residual_density(a, mu, phi) + 4 * fam.true_residual_density(a + h / 2, mu, phi) +
                        fam.true_residual_density(a + h, mu, phi));
      }
      CAPTURE(fam.name());
      CHECK(fam.true_residual_cdf(hi, mu, phi) == doctest::Approx(acc).epsilon(1e-7));
      CHECK(fam.true_residual_cdf(s.lower - 1.0, mu, phi) == 0.0);
    }
  }

  TEST_CASE("inverse Gaussian cdf stays accurate in the far tails") {
    const FamilySpec fam(FamilyKind::InverseGaussian);
    for (double mu : {0.2, 1.0, 50.0}) {
      for (double phi : {0.5, 4.0, 200.0}) {
        double prev = 0.0;
        for (double x = fam.residual_support(mu).lower + 1e-3; x < 40.0; x += 0.37) {
          const double f = fam.true_residual_cdf(x, mu, phi);
          REQUIRE(f >= prev - 1e-15);
          REQUIRE(f <= 1.0);
          prev = f;
        }
      }
    }
  }

  TEST_CASE("c'(x) values and the log-density slope agree") {
    const double mu = 2.0;
    const double phi = 3.0;
    const double x = 0.35;
    CHECK(FamilySpec(FamilyKind::Normal).c_deriv(x, mu, phi) == doctest::Approx(-(x + mu) * phi));
    CHECK(FamilySpec(FamilyKind::Gamma).c_deriv(x, mu, phi) == doctest::Approx((phi - 1) / (1 + x)));
    const double m32 = std::pow(mu, 1.5);
    const double ig = -3 * m32 / (2 * (m32 * x + mu)) + phi * m32 / (2 * std::pow(m32 * x + mu, 2));
    CHECK(FamilySpec(FamilyKind::InverseGaussian).c_deriv(x, mu, phi) == doctest::Approx(ig));
    for (FamilyKind kind : kKinds) {
      const FamilySpec fam(kind);
      const double sd = std::sqrt(fam.variance_fn(mu).v);
      const double slope = phi * sd * fam.theta_of_mu(mu) + fam.c_deriv(x, mu, phi);
      const auto [d1, d2] = fam.log_density_derivatives(x, mu, phi);
      CHECK(d1 == doctest::Approx(slope).epsilon(1e-6));
      const double h = 1e-4;
      const double fd2 = (std::log(fam.true_residual_density(x + h, mu, phi)) -
                          2 * std::log(fam.true_residual_density(x, mu, phi)) +
                          std::log(fam.true_residual_density(x - h, mu, phi))) /
                         (h * h);
      CHECK(d2 == doctest::Approx(fd2).epsilon(1e-5));
    }
  }

  TEST_CASE("domain errors outside the support") {
    const FamilySpec gamma(FamilyKind::Gamma);
    CHECK_FALSE(gamma.in_response_support(-1.0));
    CHECK_FALSE(gamma.in_mean_domain(0.0));
    CHECK(FamilySpec(FamilyKind::Normal).in_response_support(-1.0));
    try {
      gamma.c_deriv(-1.5, 1.0, 2.0);
      FAIL("expected DomainError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DomainError);
    }
    CHECK(gamma.true_residual_density(-1.5, 1.0, 2.0) == 0.0);
    CHECK_THROWS_AS(gamma.variance_fn(-2.0), Error);
  }
}
