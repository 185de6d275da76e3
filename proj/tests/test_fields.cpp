#include <doctest.h>

#include <cmath>

#include "rampage/errors.hpp"
#include "rampage/fields.hpp"

using namespace rampage;

namespace {
Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}
}  // namespace

TEST_SUITE("fields") {

TEST_CASE("polynomial10 closed form") {
  const FieldSpec f = FieldSpec::polynomial10();
  CHECK(f.dimension() == 10);
  CHECK(eval_field(f, Vector::Zero(10)).isZero(0));
  CHECK(eval_field(f, Vector::Ones(10)).isZero(0));
  CHECK(eval_field(f, Vector::Constant(10, 2.0)).isApprox(Vector::Constant(10, 18.0)));
  CHECK(eval_field(f, Vector::Constant(10, 0.5))[3] == doctest::Approx(0.5 + 5 * 0.125 - 6 * 0.25));
}

TEST_CASE("game2d at origin") {
  const FieldSpec f = FieldSpec::game2d(25.0);
  CHECK(f.dimension() == 2);
  CHECK(eval_field(f, Vector::Zero(2)).isZero(0));
  const Vector t = vec({0.3, -0.2});
  const Vector expected = vec({0.2 + 0.04 * std::sin(25 * 0.3), 0.3 + 0.04 * std::sin(-25 * 0.2)});
  const Vector got = eval_field(f, t);
  CHECK(got[0] == doctest::Approx(-(-0.2) + 0.04 * std::sin(7.5)));
  CHECK(got[1] == doctest::Approx(0.3 + 0.04 * std::sin(-5.0)));
  CHECK(got.isApprox(expected));
}

TEST_CASE("rotational game layout") {
  const FieldSpec g = FieldSpec::rotational_game(10);
  CHECK(g.dimension() == 20);
  CHECK(g.matrix()(0, 1) == 2.0);
  CHECK(g.matrix()(18, 19) == 8.0);
  CHECK(eval_field(g, Vector::Zero(20)).isZero(0));
  const FieldSpec one = FieldSpec::rotational_game(1);
  Matrix expected(2, 2);
  expected << 0.1, 2.0, -2.0, 0.1;
  CHECK(one.matrix().isApprox(expected));
}

TEST_CASE("dimension mismatch is a contract violation") {
  CHECK_THROWS_AS(eval_field(FieldSpec::polynomial10(), Vector::Zero(3)), ContractViolation);
  CHECK_THROWS_AS(FieldSpec::affine(Matrix::Identity(2, 2), Vector::Zero(3)), ContractViolation);
}

TEST_CASE("evaluation is pure") {
  const FieldSpec g = FieldSpec::rotational_game(10);
  RandomStream rs(1, 0);
  Vector t(20);
  for (Eigen::Index i = 0; i < 20; ++i) t[i] = rs.normal();
  const Vector a = eval_field(g, t), b = eval_field(g, t);
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("bilinear game operator") {
  Matrix a(1, 2);
  a << 1.0, 2.0;
  const FieldSpec g = FieldSpec::bilinear_game(a);
  CHECK(g.dimension() == 3);
  CHECK(g.x_dimension() == 1);
  CHECK(g.z_dimension() == 2);
  const Vector f = eval_field(g, vec({1.0, 3.0, 4.0}));
  CHECK(f[0] == doctest::Approx(11.0));
  CHECK(f[1] == doctest::Approx(-1.0));
  CHECK(f[2] == doctest::Approx(-2.0));
}

TEST_CASE("custom field") {
  const FieldSpec c = FieldSpec::custom("twice", 2, [](const ConstVectorRef& t, VectorRef out) { out = 2.0 * t; });
  CHECK(eval_field(c, vec({1.0, -2.0})).isApprox(vec({2.0, -4.0})));
}

TEST_CASE("projections") {
  CHECK(project(FeasibleSet::whole_space(), vec({5.0, -7.0})).isApprox(vec({5.0, -7.0})));
  CHECK(project(FeasibleSet::ball(Vector::Zero(2), 1.0), vec({2.0, 0.0})).isApprox(vec({1.0, 0.0})));
  const FeasibleSet box = FeasibleSet::box(vec({-1, -1}), vec({1, 1}));
  CHECK(project(box, vec({2.0, 0.5})).isApprox(vec({1.0, 0.5})));
  CHECK_THROWS_AS(FeasibleSet::box(vec({1, 0}), vec({0, 1})), ContractViolation);
  CHECK_THROWS_AS(FeasibleSet::ball(Vector::Zero(2), 0.0), ContractViolation);
}

TEST_CASE("projection is idempotent and nonexpansive") {
  RandomStream rs(2, 0);
  const std::vector<FeasibleSet> sets = {FeasibleSet::box(vec({-1, -0.5, 0}), vec({1, 0.5, 2})),
                                         FeasibleSet::ball(vec({0.2, 0.1, -0.3}), 0.7)};
  for (const FeasibleSet& s : sets) {
    for (int i = 0; i < 500; ++i) {
      Vector a(3), b(3);
      for (int j = 0; j < 3; ++j) {
        a[j] = 3 * rs.normal();
        b[j] = 3 * rs.normal();
      }
      const Vector pa = project(s, a), pb = project(s, b);
      REQUIRE(s.contains(pa));
      REQUIRE((project(s, pa) - pa).norm() <= 1e-15);
      REQUIRE((pa - pb).norm() <= (a - b).norm() + 1e-15);
    }
  }
}

TEST_CASE("exact oracle is bit-identical") {
  const FieldSpec f = FieldSpec::polynomial10();
  RandomStream rs(3, 0);
  const Vector t = Vector::Constant(10, 0.7);
  const Vector a = sfo_sample(f, NoiseModel::exact(), t, rs);
  CHECK((a.array() == eval_field(f, t).array()).all());
}

TEST_CASE("gaussian oracle mean and total variance") {
  const FieldSpec f = FieldSpec::game2d();
  const Vector t = vec({0.3, -0.4});
  const Vector exact = eval_field(f, t);
  const NoiseModel noise = NoiseModel::gaussian(0.1);
  RandomStream rs(4, 0);
  const int n = 100000;
  Vector sum = Vector::Zero(2), sum2 = Vector::Zero(2);
  double total = 0, total2 = 0;
  for (int i = 0; i < n; ++i) {
    const Vector d = sfo_sample(f, noise, t, rs) - exact;
    sum += d;
    sum2 += d.cwiseAbs2();
    total += d.squaredNorm();
    total2 += d.squaredNorm() * d.squaredNorm();
  }
  for (int j = 0; j < 2; ++j) {
    const double mean = sum[j] / n;
    const double se = std::sqrt((sum2[j] / n - mean * mean) / n);
    CHECK(std::abs(mean) <= 4 * se);
  }
  const double var = total / n;
  CHECK(var == doctest::Approx(0.01).epsilon(0.1));
  const double var_se = std::sqrt((total2 / n - var * var) / n);
  CHECK(std::abs(var - 0.01) <= 4 * var_se);
}

TEST_CASE("jacobian action by central differences") {
  Matrix a(3, 3);
  a << 1, 2, 0, -1, 3, 1, 0.5, 0, 2;
  const FieldSpec aff = FieldSpec::affine(a, vec({1, -1, 0.5}));
  const Vector t = vec({0.2, 0.3, -0.1}), v = vec({1.0, -2.0, 0.5});
  for (double h : {1e-6, 1e-5, 1e-4, 1e-3}) {
    const Vector jv = jacobian_action_fd(aff, t, v, h);
    CHECK((jv - a * v).norm() <= 1e-10 * (a * v).norm());
  }
  const FieldSpec p = FieldSpec::polynomial10();
  const Vector e1 = Vector::Unit(10, 0);
  const Vector j = jacobian_action_fd(p, Vector::Ones(10), e1, default_fd_step(Vector::Ones(10)));
  CHECK(j[0] == doctest::Approx(4.0).epsilon(1e-6));
  CHECK(j.tail(9).norm() < 1e-9);
  CHECK(jacobian_action_fd(p, Vector::Ones(10), Vector::Zero(10), 1e-4).isZero(0));
}

TEST_CASE("hessian quadratic form by central differences") {
  Matrix a = Matrix::Identity(2, 2);
  const FieldSpec aff = FieldSpec::affine(a, vec({1, 2}));
  CHECK(hessian_quadratic_fd(aff, vec({0.3, 0.4}), vec({1, -1}), 1e-3).norm() < 1e-8);
  const FieldSpec p = FieldSpec::polynomial10();
  const Vector h = hessian_quadratic_fd(p, Vector::Zero(10), Vector::Ones(10), default_fd_step(Vector::Zero(10)));
  for (int i = 0; i < 10; ++i) CHECK(h[i] == doctest::Approx(-12.0).epsilon(1e-6));
  CHECK(hessian_quadratic_fd(p, Vector::Ones(10), Vector::Zero(10), 1e-4).isZero(0));
}

TEST_CASE("profiles") {
  Matrix a(2, 2);
  a << 3, 1, 0, 2;
  const FieldSpec aff = FieldSpec::affine(a, Vector::Zero(2));
  const RegularityProfile prof = default_profile(aff);
  REQUIRE(prof.lipschitz.has_value());
  CHECK(*prof.lipschitz == doctest::Approx(Eigen::JacobiSVD<Matrix>(a).singularValues()[0]).epsilon(1e-6));
  CHECK_FALSE(prof.estimated);
  CHECK(default_profile(FieldSpec::polynomial10()).estimated);

  RegularityProfile bad;
  bad.lipschitz = 3.0;
  bad.cocoercivity = 1.0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  RegularityProfile ok;
  ok.lipschitz = 1.0;
  ok.cocoercivity = 1.0;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("known roots") {
  CHECK(FieldSpec::polynomial10().known_root()->isZero(0));
  Matrix a = 2.0 * Matrix::Identity(2, 2);
  const FieldSpec aff = FieldSpec::affine(a, vec({2.0, -4.0}));
  CHECK(aff.known_root()->isApprox(vec({-1.0, 2.0})));
}

}
