#include <doctest.h>

#include <cmath>

#include "rampage/errors.hpp"
#include "rampage/fields.hpp"
#include "rampage/harness.hpp"
#include "rampage/rates.hpp"
#include "rampage/solvers.hpp"

using namespace rampage;

namespace {
Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

RateParams params(double eta, double l, std::optional<double> mu = std::nullopt,
                  std::optional<double> rho = std::nullopt) {
  RateParams p;
  p.eta = eta;
  p.lipschitz = l;
  p.cocoercivity = mu;
  p.cohypomonotonicity = rho;
  return p;
}

SolverConfig constant_run(Method m, double eta, std::int64_t iters, std::uint64_t seed) {
  SolverConfig cfg;
  cfg.method = m;
  cfg.schedule = StepSizeSchedule::constant(eta);
  cfg.max_iters = iters;
  cfg.record_stride = 1;
  cfg.seed = seed;
  return cfg;
}
}  // namespace

TEST_SUITE("rates") {

TEST_CASE("regime names round trip") {
  for (int i = 0; i <= static_cast<int>(Regime::SFO_Game_RAMPAGE_PLUS); ++i) {
    const Regime r = static_cast<Regime>(i);
    CHECK(regime_from_string(to_string(r)) == r);
  }
}

TEST_CASE("co-coercive constants") {
  const RateCertificate c = rate_constant(Regime::CoCoercive_RAMPAGE, params(0.5, 1.0, 0.25));
  CHECK(c.constant == doctest::Approx(0.125));
  CHECK(c.admissible);
  CHECK_FALSE(rate_constant(Regime::CoCoercive_RAMPAGE, params(0.5, 1.0, 0.2)).admissible);
  const RateCertificate p = rate_constant(Regime::CoCoercive_RAMPAGE_PLUS, params(0.5, 1.0, 1.0));
  CHECK(p.constant == doctest::Approx(0.0625));
  CHECK(*p.step_bound == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK_THROWS_AS(rate_constant(Regime::CoCoercive_RAMPAGE, params(0.5, 1.0)), NotComputable);
}

TEST_CASE("co-hypomonotone constants at rho = 0") {
  for (double eta : {0.01, 0.1, 0.2, 0.3}) {
    for (double l : {0.5, 1.0, 2.0}) {
      const double ra = rate_constant(Regime::CoHypo_RAMPAGE, params(eta, l, std::nullopt, 0.0)).constant;
      const double rp = rate_constant(Regime::CoHypo_RAMPAGE_PLUS, params(eta, l, std::nullopt, 0.0)).constant;
      CHECK(ra + 4 * l * l * eta * eta == doctest::Approx(0.5).epsilon(1e-14));
      CHECK(rp + 6 * l * l * eta * eta == doctest::Approx(0.75).epsilon(1e-14));
    }
  }
}

TEST_CASE("admissible exactly when the constant is positive") {
  for (Regime r : {Regime::CoHypo_RAMPAGE, Regime::CoHypo_RAMPAGE_PLUS, Regime::SS_RAMPAGE, Regime::SS_RAMPAGE_PLUS}) {
    for (double eta = 0.01; eta < 1.0; eta += 0.01) {
      const RateCertificate c = rate_constant(r, params(eta, 1.0, std::nullopt, 0.01));
      REQUIRE(c.admissible == (c.constant > 0));
    }
  }
}

TEST_CASE("constants decrease in eta on the admissible interval") {
  auto check = [](Regime r, double lo, double hi, const RateParams& base) {
    double prev = INFINITY;
    for (int i = 0; i <= 200; ++i) {
      RateParams p = base;
      p.eta = lo + (hi - lo) * i / 200.0;
      const RateCertificate c = rate_constant(r, p);
      if (!c.admissible) continue;
      REQUIRE(c.constant < prev);
      prev = c.constant;
    }
  };
  check(Regime::CoHypo_RAMPAGE, 0.01, 0.4, params(0, 1.0, std::nullopt, 0.0));
  check(Regime::CoHypo_RAMPAGE_PLUS, 0.01, 0.4, params(0, 1.0, std::nullopt, 0.0));
  check(Regime::SS_RAMPAGE, 0.01, 0.5, params(0, 1.0));
  check(Regime::Game_RAMPAGE, 0.01, 0.5, params(0, 1.0));
  // eta^2 (1 - k eta^2) peaks at eta^2 = 1/(2k); decreasing beyond it.
  check(Regime::CoCoercive_RAMPAGE, 0.5, 1.0 / std::sqrt(2.0), params(0, 1.0, 1.0));
  check(Regime::CoCoercive_RAMPAGE_PLUS, 1.0 / std::sqrt(6.0), 1.0 / std::sqrt(3.0), params(0, 1.0, 1.0));
}

TEST_CASE("game step bounds") {
  CHECK(rate_constant(Regime::Game_RAMPAGE, params(0.5, 1.0)).admissible);
  CHECK_FALSE(rate_constant(Regime::Game_RAMPAGE, params(0.51, 1.0)).admissible);
  CHECK(rate_constant(Regime::Game_RAMPAGE_PLUS, params((std::sqrt(3.0) - 1) / 2, 1.0)).admissible);
  CHECK(rate_constant(Regime::Game_RAMPAGE, params(0.25, 1.0)).constant == doctest::Approx(2.0));
  CHECK(*rate_constant(Regime::SFO_Game_RAMPAGE, params(0.1, 1.0)).step_bound ==
        doctest::Approx(1.0 / std::sqrt(8.8)));
}

TEST_CASE("alpha-symmetric certificates") {
  RateParams p;
  p.eta = 0.1;
  p.k0 = 1.0;
  p.k1 = 0.0;
  p.k2 = 0.0;
  p.alpha = 0.5;
  CHECK(rate_constant(Regime::AlphaSym_RAMPAGE, p).admissible);
  p.eta = 0.2;
  CHECK_FALSE(rate_constant(Regime::AlphaSym_RAMPAGE, p).admissible);
  p.k2.reset();
  CHECK_THROWS_AS(rate_constant(Regime::AlphaSym_RAMPAGE, p), NotComputable);
}

TEST_CASE("bound checker modes") {
  BoundChecker per([](std::int64_t k) { return 1.0 / (k + 1); }, BoundMode::PerRealization);
  per.add({0, 1, 2}, {1.0, 0.5, 0.2});
  CHECK(per.report().passed());
  per.add({0, 1, 2}, {1.0, 0.6, 0.2});
  CHECK(per.report().violations == 1);
  CHECK(per.report().worst_k == 1);

  BoundChecker ex([](std::int64_t) { return 1.0; }, BoundMode::Expectation);
  ex.add({0}, {1.5});
  ex.add({0}, {0.1});
  CHECK(ex.report().passed());
  BoundChecker tight([](std::int64_t) { return 1.0; }, BoundMode::Expectation);
  for (int i = 0; i < 100; ++i) tight.add({0}, {2.0 + 0.01 * (i % 2)});
  CHECK_FALSE(tight.report().passed());

  BoundChecker nc([](std::int64_t) { return 1.0; }, BoundMode::Expectation);
  nc.mark_not_checkable("stride");
  CHECK_FALSE(nc.report().passed());
  CHECK_FALSE(nc.report().checkable);
}

TEST_CASE("residual bound at k = 0") {
  const FieldSpec id = FieldSpec::identity(4);
  const Vector theta0 = Vector::Ones(4);
  const RateCertificate c = rate_constant(Regime::CoCoercive_RAMPAGE_PLUS, params(0.5, 1.0, 1.0));
  const Trace t = run_solver(id, constant_run(Method::RAMPAGE_PLUS, 0.5, 1, 0), theta0, Vector::Zero(4));
  std::vector<std::int64_t> ks;
  std::vector<double> vals;
  running_mean_series(t, TraceColumn::ResidualSq, ks, vals);
  REQUIRE(ks.size() == 1);
  CHECK(vals[0] == doctest::Approx(4.0));
  CHECK(vals[0] <= theta0.squaredNorm() / c.constant);
}

TEST_CASE("residual bounds on the identity field") {
  const FieldSpec id = FieldSpec::identity(10);
  const Vector theta0 = Vector::Ones(10), star = Vector::Zero(10);
  const RateCertificate plus = rate_constant(Regime::CoCoercive_RAMPAGE_PLUS, params(0.5, 1.0, 1.0));
  std::vector<Trace> traces;
  for (std::uint64_t s = 0; s < 20; ++s) {
    SolverConfig cfg = constant_run(Method::RAMPAGE_PLUS, 0.5, 500, 1);
    cfg.trial = s;
    traces.push_back(run_solver(id, cfg, theta0, star));
    const DescentReport d = descent_check(traces.back(), plus);
    REQUIRE(d.checkable);
    REQUIRE(d.violations == 0);
  }
  CHECK(residual_bound_check(traces, plus, theta0, star).passed());

  const RateCertificate ra = rate_constant(Regime::CoCoercive_RAMPAGE, params(0.5, 1.0, 1.0));
  std::vector<Trace> rt = run_batch(id, constant_run(Method::RAMPAGE, 0.5, 500, 2), theta0, star, 200, true);
  CHECK(residual_bound_check(rt, ra, theta0, star).passed());

  SolverConfig strided = constant_run(Method::RAMPAGE, 0.5, 500, 2);
  strided.record_stride = 5;
  const BoundReport nc = residual_bound_check({run_solver(id, strided, theta0, star)}, ra, theta0, star);
  CHECK_FALSE(nc.checkable);
}

TEST_CASE("expected descent of RAMPAGE on the identity field") {
  const FieldSpec id = FieldSpec::identity(10);
  const double eta = 0.5;
  const double c = eta * eta * (1 - 2 * eta * eta);
  const std::vector<Trace> traces =
      run_batch(id, constant_run(Method::RAMPAGE, eta, 50, 3), Vector::Ones(10), Vector::Zero(10), 500, true);
  for (std::size_t k = 0; k + 1 < 50; ++k) {
    double mean = 0, m2 = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const auto& r = traces[i].records;
      const double v = r[k + 1].dist_sq - r[k].dist_sq + c * r[k].residual_sq;
      const double d = v - mean;
      mean += d / static_cast<double>(i + 1);
      m2 += d * (v - mean);
    }
    const double se = std::sqrt(m2 / (traces.size() - 1) / traces.size());
    REQUIRE(mean <= 4 * se + 1e-15);
  }
}

TEST_CASE("gap lemma examples") {
  const FieldSpec id = FieldSpec::identity(2);
  const GapEstimate at_root = restricted_gap_bound(id, FeasibleSet(), Vector::Zero(2), 0.3, 2.0);
  CHECK(at_root.residual_norm == 0.0);
  CHECK(at_root.bound == 0.0);

  // theta on the unit circle, F pointing inward: z is interior.
  const FieldSpec inward = FieldSpec::affine(Matrix::Zero(2, 2), vec({1.0, 0.0}));
  const FeasibleSet ball = FeasibleSet::ball(Vector::Zero(2), 1.0);
  const GapEstimate g = restricted_gap_bound(inward, ball, vec({1.0, 0.0}), 0.5, 2.0);
  CHECK(g.z.isApprox(vec({0.5, 0.0})));
  CHECK(g.residual_norm == doctest::Approx(0.5));
  CHECK(g.bound == doctest::Approx(0.5 * (1.0 + 2.0 / 0.5)));
  double direct = -INFINITY;
  for (int i = 0; i <= 200; ++i) {
    for (int j = 0; j <= 200; ++j) {
      const Vector v = vec({-1 + 0.01 * i, -1 + 0.01 * j});
      if (v.norm() > 1.0) continue;
      direct = std::max(direct, vec({1.0, 0.0}).dot(vec({1.0, 0.0}) - v));
    }
  }
  CHECK(direct <= g.bound);
}

TEST_CASE("gap lemma never undercuts the brute-force supremum") {
  Matrix a(1, 1);
  a << 1.0;
  const FieldSpec game = FieldSpec::bilinear_game(a);
  Matrix op(2, 2);
  op << 0, 1, -1, 0;
  const FieldSpec shifted = FieldSpec::affine(op, vec({0.3, -0.2}));
  const FeasibleSet box = FeasibleSet::box(Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  std::vector<Vector> grid;
  for (int i = 0; i <= 20; ++i)
    for (int j = 0; j <= 20; ++j) grid.push_back(vec({-0.5 + 0.05 * i, -0.5 + 0.05 * j}));
  RandomStream rs(7, 0);
  for (const FieldSpec* f : {&game, &shifted}) {
    for (int trial = 0; trial < 300; ++trial) {
      const Vector theta = vec({2 * rs.uniform() - 1, 2 * rs.uniform() - 1});
      const double eta = 0.05 + rs.uniform();
      const Vector fv = eval_field(*f, theta);
      double sup = -INFINITY, d_b = 0;
      for (const Vector& v : grid) {
        sup = std::max(sup, fv.dot(theta - v));
        d_b = std::max(d_b, (theta - v).norm());
      }
      const GapEstimate g = restricted_gap_bound(*f, box, theta, eta, d_b);
      REQUIRE(sup <= g.bound + 1e-12);
    }
  }
}

TEST_CASE("SS gap corollaries") {
  const double base = 1.0 / std::sqrt(1 - 4 * 0.04);
  CHECK(ss_rampage_gap_corollary(1.0, 2.0, 0.2, 0.5, 1.0, 1.0, 0) == doctest::Approx((1 + 2 / 0.2) * base));
  CHECK(ss_rampage_plus_gap_corollary(1.0, 2.0, 0.2, 1.0, 1.0, 3) ==
        doctest::Approx((1 + 2 / 0.2) * std::sqrt(2.0) * base / 2));
  CHECK_THROWS_AS(ss_rampage_gap_corollary(1.0, 2.0, 0.2, 0.0, 1.0, 1.0, 0), NotComputable);
  CHECK_THROWS_AS(ss_rampage_plus_gap_corollary(1.0, 2.0, 0.6, 1.0, 1.0, 0), NotComputable);
  GapSuprema sup;
  sup.update(vec({1, 0}), vec({0, 3}), {vec({0, 0}), vec({-1, 0})});
  CHECK(sup.d_b == doctest::Approx(2.0));
  CHECK(sup.g_b == doctest::Approx(3.0));
}

TEST_CASE("bilinear duality gap") {
  Matrix a(1, 1);
  a << 1.0;
  CHECK(duality_gap_bilinear(a, vec({1, 1}), vec({1, 1})) == 0.0);
  CHECK(duality_gap_bilinear(a, vec({1, 1}), vec({0, 0})) == 0.0);
  CHECK(duality_gap_bilinear(a, vec({1, 2}), vec({3, 4})) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(duality_gap_bilinear(a, vec({1, 2, 3}), vec({3, 4})), ContractViolation);
}

TEST_CASE("game references") {
  const auto refs = game_references(Vector::Zero(2), Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  REQUIRE(refs.size() == 5);
  CHECK(refs[0].isZero(0));
  for (std::size_t i = 1; i < refs.size(); ++i) CHECK(refs[i].cwiseAbs().isApprox(Vector::Ones(2)));
}

TEST_CASE("ergodic averages") {
  const std::vector<Vector> ys(5, vec({0.3, -0.7}));
  CHECK(ergodic_average(ys).isApprox(vec({0.3, -0.7})));
  const std::vector<Vector> y0 = {vec({1, 2})}, yt0 = {vec({3, 0})};
  CHECK(ergodic_average(y0, &yt0).isApprox(vec({2, 1})));
}

TEST_CASE("game ergodic bound holds per seed for RAMPAGE+") {
  Matrix a(1, 1);
  a << 1.0;
  const FieldSpec g = FieldSpec::bilinear_game(a);
  const Vector theta0 = Vector::Ones(2);
  const auto refs = game_references(Vector::Zero(2), Vector::Constant(2, -1.0), Vector::Constant(2, 1.0));
  const double eta = (std::sqrt(3.0) - 1) / 2;
  SolverConfig cfg = constant_run(Method::RAMPAGE_PLUS, eta, 2000, 4);
  cfg.game_gap = bilinear_game_gap(g, refs);
  const std::vector<Trace> traces = run_batch(g, cfg, theta0, std::nullopt, 10, true);
  CHECK(game_gap_check(traces, eta, theta0, refs, BoundMode::PerRealization).passed());
  const Vector avg = ergodic_average(traces[0], Method::RAMPAGE_PLUS);
  double max_gap = -INFINITY;
  for (const Vector& r : refs) max_gap = std::max(max_gap, duality_gap_bilinear(a, avg, r));
  const auto& last = traces[0].records[traces[0].records.size() - 2];
  CHECK(last.gap == doctest::Approx(max_gap).epsilon(1e-9));
}

TEST_CASE("SFO noise floors") {
  CHECK(sfo_noise_floor(Method::SFO_RAMPAGE_GAME, 0.1, 1.0, 0.0).value == 0.0);
  const double s = 0.1;
  for (double eta : {1e-4, 1e-6}) {
    CHECK(sfo_noise_floor(Method::SFO_RAMPAGE_GAME, eta, 1.0, s).value / (eta * s * s) ==
          doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sfo_noise_floor(Method::SFO_RAMPAGE_PLUS_GAME, eta, 1.0, s).value / (eta * s * s) ==
          doctest::Approx(0.75).epsilon(1e-6));
  }
  CHECK_FALSE(sfo_noise_floor(Method::SFO_RAMPAGE_GAME, 0.5, 1.0, s).admissible);
  CHECK_THROWS_AS(sfo_noise_floor(Method::EG, 0.1, 1.0, s), ContractViolation);
}

TEST_CASE("alpha-symmetric residual conversion") {
  const double nu = 0.1, k0 = 1.0, c = 2.0;
  for (double alpha : {0.5, 0.3, 0.7}) {
    for (double x : {1e-3, 0.5, 3.0, 40.0}) {
      const double y = alpha_m(x, nu, k0, c, alpha);
      CHECK(alpha_m_inverse(y, nu, k0, c, alpha) == doctest::Approx(x).epsilon(1e-10));
    }
  }
  CHECK(alpha_m_inverse(0.0, nu, k0, c, 0.5) == 0.0);
  const StepSizeSchedule s5 = StepSizeSchedule::adaptive_alpha(nu, k0, 1.0, 0.5, 0.5);
  const double b = alpha_residual_bound(s5, 4.0, 99);
  CHECK(alpha_m(b, nu, k0, s5.c_alpha(), 0.5) == doctest::Approx(16.0 / 100.0));
  const StepSizeSchedule s7 = StepSizeSchedule::adaptive_alpha(nu, k0, 1.0, 0.5, 0.7);
  CHECK_THROWS_AS(alpha_residual_bound(s7, 4.0, 99), NotComputable);
}

}
