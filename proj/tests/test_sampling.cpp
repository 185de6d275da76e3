#include <doctest.h>

#include <cmath>

#include "rampage/sampling.hpp"

using namespace rampage;

TEST_SUITE("sampling") {

TEST_CASE("same seed and stream reproduce the sequence") {
  RandomStream a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("distinct streams and substreams differ") {
  RandomStream a(42, 0), b(42, 1);
  RandomStream c = a.substream(0), d = a.substream(1);
  int same_ab = 0, same_cd = 0;
  for (int i = 0; i < 100; ++i) {
    same_ab += a.uniform() == b.uniform();
    same_cd += c.uniform() == d.uniform();
  }
  CHECK(same_ab == 0);
  CHECK(same_cd == 0);
}

TEST_CASE("substream is a pure function of the parent identity") {
  RandomStream parent(7, 2);
  RandomStream s1 = parent.substream(5);
  parent.uniform();
  RandomStream s2 = parent.substream(5);
  CHECK(s1.uniform() == s2.uniform());
}

TEST_CASE("uniform draws lie in [0, 1)") {
  RandomStream rs(1, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = draw_uniform(rs);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("antithetic complement") {
  CHECK(AntitheticDraw::from(0.3).u_tilde == 1.0 - 0.3);
  CHECK(AntitheticDraw::from(0.3).u_tilde == doctest::Approx(0.7));
  CHECK(AntitheticDraw::from(0.5).u_tilde == 0.5);
  RandomStream rs(9, 0);
  for (int i = 0; i < 10000; ++i) {
    const AntitheticDraw d = draw_antithetic(rs);
    REQUIRE(d.u + d.u_tilde == 1.0);
  }
}

TEST_CASE("antithetic covariance is -1/12") {
  RandomStream rs(11, 0);
  const int n = 100000;
  double su = 0, sv = 0, suv = 0;
  std::vector<double> prod(n);
  std::vector<AntitheticDraw> draws(n);
  for (int i = 0; i < n; ++i) {
    draws[i] = draw_antithetic(rs);
    su += draws[i].u;
    sv += draws[i].u_tilde;
  }
  const double mu = su / n, mv = sv / n;
  double s2 = 0;
  for (int i = 0; i < n; ++i) {
    prod[i] = (draws[i].u - mu) * (draws[i].u_tilde - mv);
    suv += prod[i];
  }
  const double cov = suv / (n - 1);
  for (int i = 0; i < n; ++i) s2 += (prod[i] - cov) * (prod[i] - cov);
  const double se = std::sqrt(s2 / (n - 1) / n);
  CHECK(std::abs(cov + 1.0 / 12.0) <= 4 * se);
}

TEST_CASE("uniform moments") {
  RandomStream rs(3, 0);
  const SampleMoments m = empirical_moments(rs, 1000000);
  CHECK(m.n == 1000000);
  CHECK(std::abs(m.m1 - 0.5) <= 4 * m.se1);
  CHECK(std::abs(m.m2 - 1.0 / 3.0) <= 4 * m.se2);
  CHECK(std::abs(m.m3 - 0.25) <= 4 * m.se3);
  CHECK(m.se1 == doctest::Approx(std::sqrt(1.0 / 12.0 / 1e6)).epsilon(0.01));
}

TEST_CASE("normal draws have unit variance") {
  RandomStream rs(5, 0);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rs.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

}
