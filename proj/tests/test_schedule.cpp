#include <doctest.h>

#include <cmath>

#include "mtda/errors.hpp"
#include "mtda/rng.hpp"
#include "mtda/schedule.hpp"

using namespace mtda;

TEST_CASE("growth rate examples") {
  CHECK(growth_rate(0.1, 0.8, 100) == doctest::Approx(std::log(8.0) / 100).epsilon(1e-12));
  CHECK(growth_rate(0.1, 0.8, 100) == doctest::Approx(0.020794).epsilon(1e-5));
  CHECK(growth_rate(0.1, 0.5, 200) == doctest::Approx(0.0080472).epsilon(1e-5));
}

TEST_CASE("beta midpoint and endpoints") {
  const BetaSchedule s(0.1, 0.8, 100);
  CHECK(s.at(50) == doctest::Approx(0.1 * std::sqrt(8.0)).epsilon(1e-9));
  CHECK(std::abs(s.at(0) - 0.1) < 1e-9);
  CHECK(std::abs(s.at(100) - 0.8) < 1e-9);
  CHECK(s.at(250) <= 0.8);
}

TEST_CASE("beta is monotone non-decreasing and stays in (0, 1]") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = uniform(rng, 0.001, 1.0), b = uniform(rng, 0.001, 1.0);
    const double st = std::min(a, b), fi = std::max(a, b);
    const int n = 1 + static_cast<int>(uniform_index(rng, 300));
    const BetaSchedule s(st, fi, n);
    double prev = 0.0;
    for (int e = 0; e <= n; ++e) {
      const double v = s.at(e);
      REQUIRE(v > 0.0);
      REQUIRE(v <= 1.0);
      REQUIRE(v >= prev);
      prev = v;
    }
    CHECK(std::abs(s.at(n) - fi) < 1e-9);
  }
}

TEST_CASE("batch granularity interpolates between epochs") {
  const BetaSchedule s(0.1, 0.8, 10);
  CHECK(s.at_step(3, 0, 4, BetaGranularity::batch) == s.at(3));
  CHECK(s.at_step(3, 2, 4, BetaGranularity::batch) == doctest::Approx(s.at(3.5)));
  CHECK(s.at_step(3, 2, 4, BetaGranularity::epoch) == s.at(3));
}

TEST_CASE("schedule errors") {
  CHECK_THROWS_AS(BetaSchedule(0.0, 0.8, 10), ConfigError);
  CHECK_THROWS_AS(BetaSchedule(0.1, 1.5, 10), ConfigError);
  CHECK_THROWS_AS(BetaSchedule(0.1, 0.8, 0), ConfigError);
  CHECK_THROWS_AS(growth_rate(-0.1, 0.8, 10), ArgumentError);
  CHECK_THROWS_AS(beta(0.1, 0.02, -1.0, 0.8), ArgumentError);
}
