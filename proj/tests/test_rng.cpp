#include <doctest.h>

#include <cmath>
#include <set>

#include "efnlm/families.hpp"
#include "efnlm/rng.hpp"

using namespace efnlm;

TEST_SUITE("rng") {
  TEST_CASE("streams are reproducible and distinct") {
    RandomStream a(42);
    RandomStream b(42);
    for (int k = 0; k < 100; ++k) CHECK(a.uniform() == b.uniform());
    std::set<std::uint64_t> seeds;
    for (std::uint64_t k = 0; k < 1000; ++k) seeds.insert(derive_stream_seed(20100517, k));
    CHECK(seeds.size() == 1000);
    CHECK(derive_stream_seed(1, 0) != derive_stream_seed(2, 0));
  }

  TEST_CASE("uniform lies in the open unit interval with the right moments") {
    RandomStream rng(1);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      const double u = rng.uniform();
      REQUIRE(u > 0.0);
      REQUIRE(u < 1.0);
      sum += u;
      sq += u * u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.005));
    CHECK(sq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12.0).epsilon(0.01));
  }

  TEST_CASE("standard normal and gamma moments") {
    RandomStream rng(3);
    const int n = 200000;
    double s1 = 0.0;
    double s2 = 0.0;
    for (int k = 0; k < n; ++k) {
      const double z = rng.standard_normal();
      s1 += z;
      s2 += z * z;
    }
    CHECK(std::abs(s1 / n) < 0.01);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
    for (double shape : {0.3, 1.0, 4.0, 25.0}) {
      double m = 0.0;
      double v = 0.0;
      for (int k = 0; k < n; ++k) {
        const double g = rng.standard_gamma(shape);
        REQUIRE(g > 0.0);
        m += g;
        v += g * g;
      }
      m /= n;
      v = v / n - m * m;
      CHECK(m == doctest::Approx(shape).epsilon(0.02));
      CHECK(v == doctest::Approx(shape).epsilon(0.04));
    }
  }

  TEST_CASE("family samplers have mean mu and variance V(mu)/phi") {
    const int n = 200000;
    for (const char* name : {"normal", "gamma", "inverse_gaussian"}) {
      const FamilySpec fam = FamilySpec::from_name(name);
      RandomStream rng(17);
      const double mu = 2.5;
      const double phi = 3.0;
      double m = 0.0;
      double v = 0.0;
      for (int k = 0; k < n; ++k) {
        const double y = fam.sample_response(mu, phi, rng);
        m += y;
        v += y * y;
      }
      m /= n;
      v = v / n - m * m;
      CAPTURE(name);
      CHECK(m == doctest::Approx(mu).epsilon(0.01));
      CHECK(v == doctest::Approx(fam.variance_fn(mu).v / phi).epsilon(0.05));
    }
  }
}
