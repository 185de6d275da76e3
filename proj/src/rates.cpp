#include "rampage/rates.hpp"

#include <algorithm>
#include <cmath>

#include "rampage/errors.hpp"

namespace rampage {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr Regime kAllRegimes[] = {
    Regime::CoCoercive_RAMPAGE,      Regime::CoHypo_RAMPAGE,      Regime::AlphaSym_RAMPAGE,
    Regime::SS_RAMPAGE,              Regime::CoCoercive_RAMPAGE_PLUS, Regime::CoHypo_RAMPAGE_PLUS,
    Regime::AlphaSym_RAMPAGE_PLUS,   Regime::SS_RAMPAGE_PLUS,     Regime::Game_RAMPAGE,
    Regime::Game_RAMPAGE_PLUS,       Regime::SFO_Game_RAMPAGE,    Regime::SFO_Game_RAMPAGE_PLUS,
};

double need(const std::optional<double>& v, const char* what, Regime r) {
  if (!v) throw NotComputable(std::string(to_string(r)) + ": missing parameter " + what);
  return *v;
}

bool within(double eta, double bound) { return eta <= bound * (1.0 + 1e-12); }

bool is_ss(Regime r) { return r == Regime::SS_RAMPAGE || r == Regime::SS_RAMPAGE_PLUS; }

bool is_cohypo(Regime r) { return r == Regime::CoHypo_RAMPAGE || r == Regime::CoHypo_RAMPAGE_PLUS; }

}  // namespace

const char* to_string(Regime r) {
  switch (r) {
    case Regime::CoCoercive_RAMPAGE: return "CoCoercive_RAMPAGE";
    case Regime::CoHypo_RAMPAGE: return "CoHypo_RAMPAGE";
    case Regime::AlphaSym_RAMPAGE: return "AlphaSym_RAMPAGE";
    case Regime::SS_RAMPAGE: return "SS_RAMPAGE";
    case Regime::CoCoercive_RAMPAGE_PLUS: return "CoCoercive_RAMPAGE_PLUS";
    case Regime::CoHypo_RAMPAGE_PLUS: return "CoHypo_RAMPAGE_PLUS";
    case Regime::AlphaSym_RAMPAGE_PLUS: return "AlphaSym_RAMPAGE_PLUS";
    case Regime::SS_RAMPAGE_PLUS: return "SS_RAMPAGE_PLUS";
    case Regime::Game_RAMPAGE: return "Game_RAMPAGE";
    case Regime::Game_RAMPAGE_PLUS: return "Game_RAMPAGE_PLUS";
    case Regime::SFO_Game_RAMPAGE: return "SFO_Game_RAMPAGE";
    case Regime::SFO_Game_RAMPAGE_PLUS: return "SFO_Game_RAMPAGE_PLUS";
  }
  return "?";
}

Regime regime_from_string(const std::string& name) {
  for (Regime r : kAllRegimes)
    if (name == to_string(r)) return r;
  throw ConfigError("unknown regime '" + name + "'");
}

bool is_deterministic_bound(Regime r) {
  return r == Regime::CoCoercive_RAMPAGE_PLUS || r == Regime::CoHypo_RAMPAGE_PLUS ||
         r == Regime::SS_RAMPAGE_PLUS || r == Regime::Game_RAMPAGE_PLUS;
}

RateCertificate rate_constant(Regime regime, const RateParams& p) {
  if (!(p.eta > 0)) throw ContractViolation("rate_constant: eta must be positive");
  RateCertificate c;
  c.regime = regime;
  c.eta = p.eta;
  const double eta = p.eta;
  switch (regime) {
    case Regime::CoCoercive_RAMPAGE:
    case Regime::CoCoercive_RAMPAGE_PLUS: {
      const double l = need(p.lipschitz, "L", regime);
      const double mu = need(p.cocoercivity, "mu", regime);
      const double k = regime == Regime::CoCoercive_RAMPAGE ? 2.0 : 3.0;
      c.constant = eta * eta * (1.0 - k * l * l * eta * eta);
      c.step_bound = std::min(2.0 * mu, 1.0 / (std::sqrt(k) * l));
      c.admissible = c.constant > 0 && within(eta, *c.step_bound);
      break;
    }
    case Regime::CoHypo_RAMPAGE: {
      const double l = need(p.lipschitz, "L", regime);
      const double rho = need(p.cohypomonotonicity, "rho", regime);
      const double a = eta + 2.0 * rho;
      c.constant = 0.5 - 2.0 * rho / eta - (4.0 / 3.0) * l * l * (eta * eta + 2.0 * eta * rho + 2.0 * a * a);
      c.admissible = c.constant > 0;
      break;
    }
    case Regime::CoHypo_RAMPAGE_PLUS: {
      const double l = need(p.lipschitz, "L", regime);
      const double rho = need(p.cohypomonotonicity, "rho", regime);
      const double a = rho + eta / 2.0;
      c.constant = 0.75 - 2.0 * rho / eta - 16.0 * l * l * a * a - 4.0 * l * l * eta * a;
      c.admissible = c.constant > 0;
      break;
    }
    case Regime::AlphaSym_RAMPAGE:
    case Regime::AlphaSym_RAMPAGE_PLUS: {
      const Method m = regime == Regime::AlphaSym_RAMPAGE ? Method::RAMPAGE : Method::RAMPAGE_PLUS;
      c.constant = nu_bound(m, need(p.k0, "K0", regime), need(p.k1, "K1", regime), need(p.k2, "K2", regime),
                            need(p.alpha, "alpha", regime));
      c.step_bound = c.constant;
      c.admissible = c.constant > 0 && within(eta, c.constant);
      c.note = "eta is nu";
      break;
    }
    case Regime::SS_RAMPAGE:
    case Regime::SS_RAMPAGE_PLUS: {
      const double l = need(p.lipschitz, "L", regime);
      c.constant = 1.0 - 4.0 * eta * eta * l * l;
      c.step_bound = 1.0 / (2.0 * l);
      c.admissible = c.constant > 0;
      break;
    }
    case Regime::Game_RAMPAGE:
    case Regime::Game_RAMPAGE_PLUS: {
      const double l = need(p.lipschitz, "L", regime);
      c.constant = 1.0 / (2.0 * eta);
      c.step_bound = regime == Regime::Game_RAMPAGE ? 1.0 / (2.0 * l) : (std::sqrt(3.0) - 1.0) / (2.0 * l);
      c.admissible = within(eta, *c.step_bound);
      break;
    }
    case Regime::SFO_Game_RAMPAGE:
    case Regime::SFO_Game_RAMPAGE_PLUS: {
      const double l = need(p.lipschitz, "L", regime);
      c.constant = 1.0 / (2.0 * eta);
      c.step_bound = regime == Regime::SFO_Game_RAMPAGE
                         ? 1.0 / (l * std::sqrt(2.0 * kSfoConstantRampage))
                         : std::sqrt(3.0) / (2.0 * l * std::sqrt(kSfoConstantRampagePlus));
      c.admissible = within(eta, *c.step_bound);
      break;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------

BoundChecker::BoundChecker(std::function<double(std::int64_t)> bound, BoundMode mode, double se_multiplier,
                           double rel_tol)
    : bound_(std::move(bound)), mode_(mode), se_multiplier_(se_multiplier), rel_tol_(rel_tol) {
  per_realization_.mode = mode;
  per_realization_.se_multiplier = se_multiplier;
}

void BoundChecker::mark_not_checkable(const std::string& why) {
  checkable_ = false;
  note_ = why;
}

void BoundChecker::add(const std::vector<std::int64_t>& iters, const std::vector<double>& values) {
  if (iters.size() != values.size()) throw ContractViolation("BoundChecker::add: size mismatch");
  ++trials_;
  for (std::size_t i = 0; i < iters.size(); ++i) {
    const double v = values[i];
    const std::int64_t k = iters[i];
    if (std::isnan(v) || k < 0) continue;
    if (mode_ == BoundMode::PerRealization) {
      const double b = bound_(k);
      if (std::isinf(b) && b > 0) continue;
      const double excess = v - b;
      ++per_realization_.checked_points;
      if (excess > per_realization_.max_excess) {
        per_realization_.max_excess = excess;
        per_realization_.worst_k = k;
      }
      if (excess > rel_tol_ * std::max(1.0, std::abs(b))) ++per_realization_.violations;
    } else {
      if (static_cast<std::size_t>(k) >= cells_.size()) cells_.resize(static_cast<std::size_t>(k) + 1);
      Cell& c = cells_[static_cast<std::size_t>(k)];
      ++c.n;
      const double d = v - c.mean;
      c.mean += d / static_cast<double>(c.n);
      c.m2 += d * (v - c.mean);
    }
  }
}

BoundReport BoundChecker::report() const {
  BoundReport r;
  if (mode_ == BoundMode::PerRealization) {
    r = per_realization_;
  } else {
    r.mode = mode_;
    r.se_multiplier = se_multiplier_;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      const Cell& c = cells_[k];
      if (c.n == 0) continue;
      const double b = bound_(static_cast<std::int64_t>(k));
      if (std::isinf(b) && b > 0) continue;
      ++r.checked_points;
      const double se = c.n > 1 ? std::sqrt(c.m2 / static_cast<double>(c.n - 1) / static_cast<double>(c.n)) : 0.0;
      const double excess = c.mean - b;
      const double in_se = se > 0 ? excess / se : (excess > 0 ? kInf : (excess < 0 ? -kInf : 0.0));
      r.max_excess = std::max(r.max_excess, excess);
      if (in_se > r.max_excess_se) {
        r.max_excess_se = in_se;
        r.worst_k = static_cast<std::int64_t>(k);
      }
      if (excess > se_multiplier_ * se + rel_tol_ * std::max(1.0, std::abs(b))) ++r.violations;
    }
  }
  r.trials = trials_;
  r.checkable = checkable_;
  if (!note_.empty()) r.note = note_;
  return r;
}

void running_mean_series(const Trace& trace, TraceColumn column, std::vector<std::int64_t>& iters,
                         std::vector<double>& values) {
  iters.clear();
  values.clear();
  if (trace.record_stride != 1) throw NotComputable("running_mean_series: record stride must be 1");
  double sum = 0.0;
  std::int64_t count = 0;
  for (const TraceRecord& rec : trace.records) {
    if (rec.iter >= trace.iterations) break;
    double v = kNaN;
    switch (column) {
      case TraceColumn::ResidualSq: v = rec.residual_sq; break;
      case TraceColumn::ProjResidualSq: v = rec.proj_residual_sq; break;
      case TraceColumn::DistSq: v = rec.dist_sq; break;
      case TraceColumn::Gap: v = rec.gap; break;
    }
    if (rec.iter != count) throw NotComputable("running_mean_series: records are not contiguous");
    sum += v;
    ++count;
    iters.push_back(rec.iter);
    values.push_back(sum / static_cast<double>(count));
  }
}

BoundChecker make_residual_checker(const RateCertificate& cert, double initial_dist_sq) {
  const BoundMode mode = is_deterministic_bound(cert.regime) ? BoundMode::PerRealization : BoundMode::Expectation;
  const double c = cert.constant;
  // The co-hypomonotone constants multiply eta^2 |F|^2 in the descent step.
  const double scale = is_cohypo(cert.regime) ? cert.eta * cert.eta * c : c;
  BoundChecker checker(
      [scale, initial_dist_sq](std::int64_t k) {
        if (!(scale > 0)) return kInf;
        return initial_dist_sq / (scale * static_cast<double>(k + 1));
      },
      mode);
  return checker;
}

void add_residual_trace(BoundChecker& checker, const Trace& trace, Regime regime) {
  if (trace.record_stride != 1) {
    checker.mark_not_checkable("record stride > 1");
    return;
  }
  std::vector<std::int64_t> iters;
  std::vector<double> values;
  running_mean_series(trace, is_ss(regime) ? TraceColumn::ProjResidualSq : TraceColumn::ResidualSq, iters, values);
  checker.add(iters, values);
}

BoundReport residual_bound_check(const std::vector<Trace>& traces, const RateCertificate& cert,
                                 const Vector& theta0, const Vector& theta_star) {
  BoundChecker checker = make_residual_checker(cert, (theta0 - theta_star).squaredNorm());
  for (const Trace& t : traces) add_residual_trace(checker, t, cert.regime);
  BoundReport r = checker.report();
  r.label = to_string(cert.regime);
  if (!(cert.constant > 0)) {
    r.vacuous = true;
    r.note = "non-positive constant; bound is +infinity";
  }
  return r;
}

DescentReport descent_check(const Trace& trace, const RateCertificate& cert, double rel_tol) {
  DescentReport out;
  if (trace.record_stride != 1) {
    out.checkable = false;
    return out;
  }
  const double scale = is_cohypo(cert.regime) ? cert.eta * cert.eta * cert.constant : cert.constant;
  const bool ss = is_ss(cert.regime);
  const double pair = cert.regime == Regime::SS_RAMPAGE_PLUS ? 2.0 : 1.0;
  for (std::size_t i = 0; i + 1 < trace.records.size(); ++i) {
    const TraceRecord& a = trace.records[i];
    const TraceRecord& b = trace.records[i + 1];
    if (b.iter != a.iter + 1 || std::isnan(a.dist_sq) || std::isnan(b.dist_sq)) {
      out.checkable = false;
      continue;
    }
    const double m = ss ? pair * a.proj_residual_sq : a.residual_sq;
    const double excess = b.dist_sq - (a.dist_sq - scale * m);
    ++out.steps;
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > rel_tol * std::max(1.0, a.dist_sq)) ++out.violations;
  }
  return out;
}

// ---------------------------------------------------------------------------

GapEstimate restricted_gap_bound(const FieldSpec& spec, const FeasibleSet& set, const ConstVectorRef& theta,
                                 double eta, double d_b, std::optional<double> g_b, std::string reference_set) {
  if (!(eta > 0)) throw ContractViolation("restricted_gap_bound: eta must be positive");
  if (d_b < 0) throw ContractViolation("restricted_gap_bound: D_B must be nonnegative");
  const Vector f = spec(theta);
  GapEstimate g;
  g.z = theta - eta * f;
  set.project_in_place(g.z);
  g.residual_norm = (theta - g.z).norm();
  g.field_norm = f.norm();
  g.d_b = d_b;
  g.g_b = g_b ? *g_b : g.field_norm;
  g.bound = g.residual_norm == 0.0 ? 0.0 : g.residual_norm * (g.g_b + d_b / eta);
  g.reference_set = std::move(reference_set);
  return g;
}

namespace {

double ss_rate_factor(double eta, double lipschitz, double initial_dist, std::int64_t k) {
  const double c = 1.0 - 4.0 * eta * eta * lipschitz * lipschitz;
  if (!(c > 0)) throw NotComputable("SS gap corollary: 1 - 4 eta^2 L^2 must be positive");
  return initial_dist / std::sqrt(c * static_cast<double>(k + 1));
}

}  // namespace

double ss_rampage_gap_corollary(double g_b, double d_b, double eta, double u, double lipschitz,
                                double initial_dist, std::int64_t k) {
  if (!(u > 0)) throw NotComputable("SS gap corollary: realized step 2 eta u is zero");
  return (g_b + d_b / (2.0 * eta * u)) * ss_rate_factor(eta, lipschitz, initial_dist, k);
}

double ss_rampage_plus_gap_corollary(double g_b, double d_b, double eta, double lipschitz, double initial_dist,
                                     std::int64_t k) {
  return (g_b + d_b / eta) * std::sqrt(2.0) * ss_rate_factor(eta, lipschitz, initial_dist, k);
}

void GapSuprema::update(const ConstVectorRef& theta, const ConstVectorRef& f, const std::vector<Vector>& refs) {
  for (const Vector& v : refs) d_b = std::max(d_b, (theta - v).norm());
  g_b = std::max(g_b, f.norm());
}

double duality_gap_bilinear(const Matrix& a, const ConstVectorRef& candidate, const ConstVectorRef& reference) {
  const Eigen::Index n = a.rows(), m = a.cols();
  if (candidate.size() != n + m || reference.size() != n + m)
    throw ContractViolation("duality_gap_bilinear: blocks do not match the coupling matrix");
  const auto xc = candidate.head(n), zc = candidate.tail(m);
  const auto xr = reference.head(n), zr = reference.tail(m);
  return xc.dot(a * zr) - xr.dot(a * zc);
}

std::vector<Vector> game_references(const Vector& saddle, const Vector& lower, const Vector& upper) {
  const Eigen::Index p = saddle.size();
  if (lower.size() != p || upper.size() != p) throw ContractViolation("game_references: dimension mismatch");
  if (p > 16) throw ConfigError("game_references: too many box corners (p > 16)");
  std::vector<Vector> refs{saddle};
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << p); ++mask) {
    Vector c(p);
    for (Eigen::Index i = 0; i < p; ++i) c[i] = (mask >> i) & 1 ? upper[i] : lower[i];
    refs.push_back(std::move(c));
  }
  return refs;
}

GameGap bilinear_game_gap(const FieldSpec& spec, std::vector<Vector> references) {
  if (spec.kind() != FieldKind::BilinearGame) throw ContractViolation("bilinear_game_gap: not a bilinear game");
  for (const Vector& r : references)
    if (r.size() != spec.dimension()) throw ContractViolation("bilinear_game_gap: reference dimension mismatch");
  GameGap g;
  g.references = std::move(references);
  Matrix a = spec.matrix();
  g.gap = [a](const Vector& c, const Vector& r) { return duality_gap_bilinear(a, c, r); };
  return g;
}

Vector ergodic_average(const Trace& trace, Method method) {
  if (trace.method != to_string(method)) throw ContractViolation("ergodic_average: trace method mismatch");
  if (trace.iterations == 0) throw NotComputable("ergodic_average: no iterations");
  return trace.ergodic_sum / static_cast<double>(trace.iterations);
}

Vector ergodic_average(const std::vector<Vector>& midpoints, const std::vector<Vector>* antithetic) {
  if (midpoints.empty()) throw NotComputable("ergodic_average: no midpoints");
  if (antithetic && antithetic->size() != midpoints.size())
    throw ContractViolation("ergodic_average: pair count mismatch");
  Vector sum = Vector::Zero(midpoints.front().size());
  for (std::size_t t = 0; t < midpoints.size(); ++t) {
    if (antithetic) {
      sum += 0.5 * (midpoints[t] + (*antithetic)[t]);
    } else {
      sum += midpoints[t];
    }
  }
  return sum / static_cast<double>(midpoints.size());
}

GameGapChecker::GameGapChecker(double eta, const Vector& theta0, const std::vector<Vector>& references,
                               BoundMode mode, double floor, double se_multiplier)
    : mode_(mode) {
  if (!(eta > 0)) throw ContractViolation("GameGapChecker: eta must be positive");
  for (const Vector& ref : references) {
    const double d2 = (theta0 - ref).squaredNorm();
    checkers_.emplace_back(
        [d2, eta, floor](std::int64_t k) { return d2 / (2.0 * eta * static_cast<double>(k + 1)) + floor; }, mode,
        se_multiplier);
  }
}

void GameGapChecker::add(const Trace& t) {
  if (t.num_references != checkers_.size()) throw ContractViolation("GameGapChecker: reference count mismatch");
  std::vector<std::int64_t> iters;
  std::vector<double> values;
  for (std::size_t r = 0; r < checkers_.size(); ++r) {
    iters.clear();
    values.clear();
    for (std::size_t i = 0; i < t.records.size(); ++i) {
      if (t.records[i].iter >= t.iterations) continue;
      iters.push_back(t.records[i].iter);
      values.push_back(t.reference_gap(i, r));
    }
    checkers_[r].add(iters, values);
  }
}

BoundReport GameGapChecker::report() const {
  BoundReport total;
  total.mode = mode_;
  total.label = "game_gap";
  for (const BoundChecker& c : checkers_) {
    const BoundReport rep = c.report();
    total.trials = rep.trials;
    total.checked_points += rep.checked_points;
    total.violations += rep.violations;
    if (rep.max_excess > total.max_excess) {
      total.max_excess = rep.max_excess;
      if (mode_ == BoundMode::PerRealization) total.worst_k = rep.worst_k;
    }
    if (rep.max_excess_se > total.max_excess_se) {
      total.max_excess_se = rep.max_excess_se;
      if (mode_ == BoundMode::Expectation) total.worst_k = rep.worst_k;
    }
  }
  return total;
}

BoundReport game_gap_check(const std::vector<Trace>& traces, double eta, const Vector& theta0,
                           const std::vector<Vector>& references, BoundMode mode, double floor) {
  GameGapChecker checker(eta, theta0, references, mode, floor);
  for (const Trace& t : traces) checker.add(t);
  return checker.report();
}

NoiseFloor sfo_noise_floor(Method method, double eta, double lipschitz, double sigma) {
  if (!(eta > 0) || !(lipschitz > 0) || sigma < 0)
    throw ContractViolation("sfo_noise_floor: eta, L must be positive and sigma nonnegative");
  NoiseFloor f;
  const double s2 = sigma * sigma;
  const double e2l2 = eta * eta * lipschitz * lipschitz;
  if (method == Method::SFO_RAMPAGE_GAME || method == Method::RAMPAGE) {
    f.value = eta * (2.0 + e2l2 * kSfoConstantRampage) / 2.0 * s2;
    f.step_bound = 1.0 / (lipschitz * std::sqrt(2.0 * kSfoConstantRampage));
  } else if (method == Method::SFO_RAMPAGE_PLUS_GAME || method == Method::RAMPAGE_PLUS) {
    f.value = eta * (1.5 + e2l2 * kSfoConstantRampagePlus) / 2.0 * s2;
    f.step_bound = std::sqrt(3.0) / (2.0 * lipschitz * std::sqrt(kSfoConstantRampagePlus));
  } else {
    throw ContractViolation("sfo_noise_floor: method has no SFO game bound");
  }
  f.admissible = within(eta, f.step_bound);
  return f;
}

// ---------------------------------------------------------------------------

double alpha_m(double x, double nu, double k0, double c_alpha, double alpha) {
  const double r = nu * x / (k0 + c_alpha * std::pow(x, alpha));
  return r * r;
}

double alpha_m_inverse(double y, double nu, double k0, double c_alpha, double alpha) {
  if (y < 0 || !(nu > 0) || k0 < 0 || c_alpha < 0) throw ContractViolation("alpha_m_inverse: bad arguments");
  if (!(alpha > 0 && alpha < 1)) throw ContractViolation("alpha_m_inverse: alpha must lie in (0, 1)");
  if (k0 == 0 && c_alpha == 0) throw NotComputable("alpha_m_inverse: K0 = C_alpha = 0");
  if (y == 0) return 0.0;
  const double sy = std::sqrt(y);
  if (alpha == 0.5) {
    const double s = (c_alpha * sy + std::sqrt(c_alpha * c_alpha * y + 4.0 * nu * k0 * sy)) / (2.0 * nu);
    return s * s;
  }
  // nu x / (K0 + C x^alpha) is increasing in x.
  auto g = [&](double x) { return nu * x / (k0 + c_alpha * std::pow(x, alpha)) - sy; };
  double lo = 0.0, hi = 1.0;
  while (g(hi) < 0) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NotComputable("alpha_m_inverse: no bracket");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double alpha_residual_bound(const StepSizeSchedule& s, double initial_dist_sq, std::int64_t k) {
  if (s.is_constant()) throw ContractViolation("alpha_residual_bound: schedule is not adaptive");
  if (s.alpha() > 0.5) throw NotComputable("alpha_residual_bound: Jensen step needs alpha <= 1/2");
  if (k < 0) throw ContractViolation("alpha_residual_bound: k must be nonnegative");
  const double y = 4.0 * initial_dist_sq / static_cast<double>(k + 1);
  return alpha_m_inverse(y, s.nu(), s.k0(), s.c_alpha(), s.alpha());
}

}  // namespace rampage
