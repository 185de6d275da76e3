#include "rampage/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "rampage/errors.hpp"

namespace rampage {

const char* to_string(Method method) {
  switch (method) {
    case Method::EG: return "EG";
    case Method::RAMPAGE: return "RAMPAGE";
    case Method::RAMPAGE_PLUS: return "RAMPAGE_PLUS";
    case Method::SS_RAMPAGE: return "SS_RAMPAGE";
    case Method::SS_RAMPAGE_PLUS: return "SS_RAMPAGE_PLUS";
    case Method::SFO_RAMPAGE_GAME: return "SFO_RAMPAGE_GAME";
    case Method::SFO_RAMPAGE_PLUS_GAME: return "SFO_RAMPAGE_PLUS_GAME";
  }
  return "?";
}

Method method_from_string(const std::string& name) {
  for (auto m : {Method::EG, Method::RAMPAGE, Method::RAMPAGE_PLUS, Method::SS_RAMPAGE,
                 Method::SS_RAMPAGE_PLUS, Method::SFO_RAMPAGE_GAME, Method::SFO_RAMPAGE_PLUS_GAME}) {
    if (name == to_string(m)) return m;
  }
  if (name == "RAMPAGE+") return Method::RAMPAGE_PLUS;
  if (name == "SS_RAMPAGE+") return Method::SS_RAMPAGE_PLUS;
  throw ConfigError("unknown method '" + name + "'");
}

bool is_projected(Method m) { return m == Method::SS_RAMPAGE || m == Method::SS_RAMPAGE_PLUS; }

bool is_stochastic_oracle(Method m) {
  return m == Method::SFO_RAMPAGE_GAME || m == Method::SFO_RAMPAGE_PLUS_GAME;
}

bool is_antithetic(Method m) {
  return m == Method::RAMPAGE_PLUS || m == Method::SS_RAMPAGE_PLUS || m == Method::SFO_RAMPAGE_PLUS_GAME;
}

double alpha_constant(double k1, double k2, double alpha) {
  return k1 + std::pow(2.0, alpha / (1.0 - alpha)) * k2;
}

StepSizeSchedule StepSizeSchedule::constant(double eta) {
  if (!(eta > 0) || !std::isfinite(eta)) throw ContractViolation("constant schedule: eta must be positive");
  StepSizeSchedule s;
  s.constant_ = true;
  s.eta_ = eta;
  return s;
}

StepSizeSchedule StepSizeSchedule::adaptive_alpha(double nu, double k0, double k1, double k2,
                                                  double alpha, std::optional<double> c_alpha) {
  if (!(nu > 0)) throw ContractViolation("adaptive schedule: nu must be positive");
  if (k0 < 0 || k1 < 0 || k2 < 0) throw ContractViolation("adaptive schedule: K0, K1, K2 must be nonnegative");
  if (!(alpha > 0 && alpha < 1)) throw ContractViolation("adaptive schedule: alpha must lie in (0, 1)");
  const double computed = alpha_constant(k1, k2, alpha);
  if (c_alpha && std::abs(*c_alpha - computed) > 1e-12 * std::max(1.0, std::abs(computed))) {
    throw ContractViolation("adaptive schedule: C_alpha disagrees with K1 + 2^(a/(1-a)) K2");
  }
  StepSizeSchedule s;
  s.constant_ = false;
  s.nu_ = nu;
  s.k0_ = k0;
  s.k1_ = k1;
  s.k2_ = k2;
  s.alpha_ = alpha;
  s.c_alpha_ = computed;
  s.eta_ = nu;
  return s;
}

double StepSizeSchedule::step(double residual_norm) const {
  return constant_ ? eta_ : adaptive_stepsize(*this, residual_norm);
}

double adaptive_stepsize(const StepSizeSchedule& schedule, double residual_norm) {
  if (schedule.is_constant()) throw ContractViolation("adaptive_stepsize: schedule is constant");
  if (residual_norm < 0) throw ContractViolation("adaptive_stepsize: negative residual norm");
  const double denom = schedule.k0() + schedule.c_alpha() * std::pow(residual_norm, schedule.alpha());
  if (!(denom > 0)) throw NotComputable("adaptive_stepsize: degenerate schedule (K0 = 0 at zero residual)");
  return schedule.nu() / denom;
}

double nu_bound(Method method, double k0, double k1, double k2, double alpha) {
  if (method != Method::RAMPAGE && method != Method::RAMPAGE_PLUS)
    throw ContractViolation("nu_bound: only RAMPAGE and RAMPAGE_PLUS carry an alpha-symmetric bound");
  if (k0 < 0 || k1 < 0 || k2 < 0) throw ContractViolation("nu_bound: constants must be nonnegative");
  if (!(alpha > 0 && alpha < 1)) throw ContractViolation("nu_bound: alpha must lie in (0, 1)");
  const double scale = method == Method::RAMPAGE ? 1.0 / 8.0 : std::sqrt(6.0) / 16.0;
  if (k1 == 0 && k2 == 0) return scale;
  const double c = alpha_constant(k1, k2, alpha);
  const double gap = c - k1;
  if (!(gap > 0)) throw NotComputable("nu_bound: C_alpha - K1 = 0 (K2 = 0), second branch undefined");
  const double first = scale * c / (c + k1);
  const double second = c * std::pow(scale / gap, 1.0 - alpha);
  return std::min(first, second);
}

// ---------------------------------------------------------------------------

namespace {

void require_eta(double eta) {
  if (!(eta > 0)) throw ContractViolation("step: eta must be positive");
}

void require_u(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw ContractViolation("step: u must lie in [0, 1]");
}

// theta - scale * f, shared by every extrapolation so that u = 1/2 reproduces
// EG bit for bit (2 * eta * 0.5 == eta exactly).
inline void extrapolate(const ConstVectorRef& theta, const ConstVectorRef& f, double scale,
                        VectorRef out) {
  out = theta - scale * f;
}

}  // namespace

StepKernel::StepKernel(const FieldSpec& spec, Method method, FeasibleSet set, NoiseModel noise)
    : spec_(spec),
      method_(method),
      set_(std::move(set)),
      noise_(noise),
      y_(spec.dimension()),
      y_tilde_(spec.dimension()),
      f_y_(spec.dimension()),
      f_y_tilde_(spec.dimension()) {}

void StepKernel::advance(const ConstVectorRef& theta, const ConstVectorRef& f_base, double eta,
                         AntitheticDraw draw, OracleStreams* rng, VectorRef next) {
  const double u = draw.u;
  const double ut = draw.u_tilde;
  switch (method_) {
    case Method::EG:
      extrapolate(theta, f_base, eta, y_);
      spec_.evaluate(y_, f_y_);
      next = theta - eta * f_y_;
      y_tilde_ = y_;
      return;
    case Method::RAMPAGE:
      extrapolate(theta, f_base, 2.0 * eta * u, y_);
      spec_.evaluate(y_, f_y_);
      next = theta - eta * f_y_;
      y_tilde_ = y_;
      return;
    case Method::RAMPAGE_PLUS:
      extrapolate(theta, f_base, 2.0 * eta * u, y_);
      extrapolate(theta, f_base, 2.0 * eta * ut, y_tilde_);
      spec_.evaluate(y_, f_y_);
      spec_.evaluate(y_tilde_, f_y_tilde_);
      f_y_ = 0.5 * (f_y_ + f_y_tilde_);
      next = theta - eta * f_y_;
      return;
    case Method::SS_RAMPAGE: {
      const double s = 2.0 * eta * u;
      extrapolate(theta, f_base, s, y_);
      set_.project_in_place(y_);
      spec_.evaluate(y_, f_y_);
      next = theta - s * f_y_;
      set_.project_in_place(next);
      y_tilde_ = y_;
      return;
    }
    case Method::SS_RAMPAGE_PLUS:
      extrapolate(theta, f_base, 2.0 * eta * u, y_);
      extrapolate(theta, f_base, 2.0 * eta * ut, y_tilde_);
      set_.project_in_place(y_);
      set_.project_in_place(y_tilde_);
      spec_.evaluate(y_, f_y_);
      spec_.evaluate(y_tilde_, f_y_tilde_);
      next = theta - eta * (u * f_y_ + ut * f_y_tilde_);
      set_.project_in_place(next);
      return;
    case Method::SFO_RAMPAGE_GAME:
      if (rng == nullptr) throw ContractViolation("SFO step: oracle streams required");
      extrapolate(theta, f_base, 2.0 * eta * u, y_);
      sfo_sample_into(spec_, noise_, y_, rng->update, f_y_);
      next = theta - eta * f_y_;
      y_tilde_ = y_;
      return;
    case Method::SFO_RAMPAGE_PLUS_GAME:
      if (rng == nullptr) throw ContractViolation("SFO step: oracle streams required");
      extrapolate(theta, f_base, 2.0 * eta * u, y_);
      extrapolate(theta, f_base, 2.0 * eta * ut, y_tilde_);
      sfo_sample_into(spec_, noise_, y_, rng->update, f_y_);
      sfo_sample_into(spec_, noise_, y_tilde_, rng->update, f_y_tilde_);
      f_y_ = 0.5 * (f_y_ + f_y_tilde_);
      next = theta - eta * f_y_;
      return;
  }
}

OracleStreams OracleStreams::from(const RandomStream& trial_stream) {
  return {trial_stream.substream(1), trial_stream.substream(2)};
}

Vector eg_step(const FieldSpec& spec, const ConstVectorRef& theta, double eta) {
  require_eta(eta);
  StepKernel k(spec, Method::EG, FeasibleSet(), NoiseModel());
  Vector next(spec.dimension());
  k.advance(theta, spec(theta), eta, AntitheticDraw::from(0.5), nullptr, next);
  return next;
}

Vector rampage_step(const FieldSpec& spec, const ConstVectorRef& theta, double eta, double u) {
  require_eta(eta);
  require_u(u);
  StepKernel k(spec, Method::RAMPAGE, FeasibleSet(), NoiseModel());
  Vector next(spec.dimension());
  k.advance(theta, spec(theta), eta, AntitheticDraw::from(u), nullptr, next);
  return next;
}

Vector rampage_plus_step(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                         AntitheticDraw draw) {
  require_eta(eta);
  require_u(draw.u);
  StepKernel k(spec, Method::RAMPAGE_PLUS, FeasibleSet(), NoiseModel());
  Vector next(spec.dimension());
  k.advance(theta, spec(theta), eta, draw, nullptr, next);
  return next;
}

MidpointStep ss_rampage_step(const FieldSpec& spec, const FeasibleSet& set, const ConstVectorRef& theta,
                             double eta, double u) {
  require_eta(eta);
  require_u(u);
  StepKernel k(spec, Method::SS_RAMPAGE, set, NoiseModel());
  Vector next(spec.dimension());
  k.advance(theta, spec(theta), eta, AntitheticDraw::from(u), nullptr, next);
  return {k.y(), std::move(next)};
}

AntitheticStep ss_rampage_plus_step(const FieldSpec& spec, const FeasibleSet& set,
                                    const ConstVectorRef& theta, double eta, AntitheticDraw draw) {
  require_eta(eta);
  require_u(draw.u);
  StepKernel k(spec, Method::SS_RAMPAGE_PLUS, set, NoiseModel());
  Vector next(spec.dimension());
  k.advance(theta, spec(theta), eta, draw, nullptr, next);
  return {k.y(), k.y_tilde(), std::move(next)};
}

MidpointStep sfo_rampage_game_step(const FieldSpec& spec, const NoiseModel& noise,
                                   const ConstVectorRef& theta, double eta, double u,
                                   OracleStreams& rng) {
  require_eta(eta);
  require_u(u);
  StepKernel k(spec, Method::SFO_RAMPAGE_GAME, FeasibleSet(), noise);
  const Vector base = sfo_sample(spec, noise, theta, rng.base);
  Vector next(spec.dimension());
  k.advance(theta, base, eta, AntitheticDraw::from(u), &rng, next);
  return {k.y(), std::move(next)};
}

AntitheticStep sfo_rampage_plus_game_step(const FieldSpec& spec, const NoiseModel& noise,
                                          const ConstVectorRef& theta, double eta,
                                          AntitheticDraw draw, OracleStreams& rng) {
  require_eta(eta);
  require_u(draw.u);
  StepKernel k(spec, Method::SFO_RAMPAGE_PLUS_GAME, FeasibleSet(), noise);
  const Vector base = sfo_sample(spec, noise, theta, rng.base);
  Vector next(spec.dimension());
  k.advance(theta, base, eta, draw, &rng, next);
  return {k.y(), k.y_tilde(), std::move(next)};
}

// ---------------------------------------------------------------------------

std::int64_t default_record_stride(std::int64_t max_iters) {
  if (max_iters <= 10000) return 1;
  return (max_iters + 9999) / 10000;
}

std::int64_t SolverConfig::effective_stride() const {
  return record_stride > 0 ? record_stride : default_record_stride(max_iters);
}

void SolverConfig::validate(const FieldSpec& spec, const ConstVectorRef& theta0) const {
  if (max_iters < 0) throw ConfigError("max_iters must be nonnegative");
  if (record_stride < 0) throw ConfigError("record_stride must be nonnegative");
  if (!(divergence_threshold > 0)) throw ConfigError("divergence_threshold must be positive");
  if (theta0.size() != spec.dimension())
    throw ContractViolation("run_solver: theta0 dimension does not match the field");
  if (auto d = feasible_set.dimension(); d && *d != spec.dimension())
    throw ContractViolation("run_solver: feasible set dimension does not match the field");
  if (is_projected(method) && !feasible_set.contains(theta0, 1e-12))
    throw ContractViolation("run_solver: theta0 must be feasible for projected methods");
  if (!is_projected(method) && !feasible_set.is_whole_space())
    throw ConfigError(std::string("method ") + to_string(method) + " ignores feasible sets; use SS_*");
  if (game_gap && !game_gap->gap) throw ConfigError("game_gap: gap function is empty");
}

Trace run_solver(const FieldSpec& spec, const SolverConfig& config, const Vector& theta0,
                 const std::optional<Vector>& theta_star) {
  config.validate(spec, theta0);
  if (theta_star && theta_star->size() != spec.dimension())
    throw ContractViolation("run_solver: theta_star dimension mismatch");

  const int p = spec.dimension();
  const std::int64_t stride = config.effective_stride();
  const bool sfo = is_stochastic_oracle(config.method);
  const bool antithetic = is_antithetic(config.method);
  const bool random = config.method != Method::EG;

  Trace trace;
  trace.method = to_string(config.method);
  trace.eta = config.schedule.is_constant() ? config.schedule.eta() : config.schedule.nu();
  trace.seed = config.seed;
  trace.trial = config.trial;
  trace.record_stride = stride;
  trace.ergodic_sum = Vector::Zero(p);
  const std::size_t num_refs = config.game_gap ? config.game_gap->references.size() : 0;
  trace.num_references = num_refs;
  trace.records.reserve(static_cast<std::size_t>(config.max_iters / stride + 2));
  if (num_refs) trace.reference_gaps.reserve(trace.records.capacity() * num_refs);

  RandomStream trial_stream(config.seed, config.trial);
  RandomStream u_stream = trial_stream.substream(0);
  OracleStreams oracle = OracleStreams::from(trial_stream);

  StepKernel kernel(spec, config.method, config.feasible_set, config.noise);
  Vector theta = theta0;
  Vector next(p), f_exact(p), f_base(p), ergodic(p), scratch(p);
  const bool constrained = !config.feasible_set.is_whole_space();
  auto infeasibility = [&](const Vector& x) {
    scratch = x;
    config.feasible_set.project_in_place(scratch);
    trace.max_infeasibility = std::max(trace.max_infeasibility, (x - scratch).norm());
  };
  if (constrained) infeasibility(theta);

  auto dist_sq = [&](const Vector& t) {
    return theta_star ? (t - *theta_star).squaredNorm() : std::numeric_limits<double>::quiet_NaN();
  };
  auto note_best = [&](std::int64_t iter, double r) {
    if (r < trace.best_residual_sq) {
      trace.best_residual_sq = r;
      trace.best_iter = iter;
    }
  };

  std::int64_t t = 0;
  for (; t < config.max_iters; ++t) {
    const bool record = (t % stride) == 0;
    double residual_sq;
    if (sfo) {
      sfo_sample_into(spec, config.noise, theta, oracle.base, f_base);
      if (record || config.convergence_tolerance > 0) {
        spec.evaluate(theta, f_exact);
        residual_sq = f_exact.squaredNorm();
      } else {
        residual_sq = std::numeric_limits<double>::quiet_NaN();
      }
    } else {
      spec.evaluate(theta, f_base);
      residual_sq = f_base.squaredNorm();
    }

    if (config.convergence_tolerance > 0 && residual_sq < config.convergence_tolerance) {
      trace.converged = true;
      break;
    }

    const double eta = config.schedule.step(std::sqrt(f_base.squaredNorm()));
    const AntitheticDraw draw = random ? draw_antithetic(u_stream) : AntitheticDraw::from(0.5);
    kernel.advance(theta, f_base, eta, draw, &oracle, next);

    if (constrained) {
      infeasibility(next);
      infeasibility(kernel.y());
      if (antithetic) infeasibility(kernel.y_tilde());
    }
    if (antithetic) {
      trace.ergodic_sum += 0.5 * (kernel.y() + kernel.y_tilde());
    } else {
      trace.ergodic_sum += kernel.y();
    }

    if (record) {
      TraceRecord rec;
      rec.iter = t;
      rec.residual_sq = residual_sq;
      rec.dist_sq = dist_sq(theta);
      rec.step_size = eta;
      rec.u = random ? draw.u : 0.5;
      if (antithetic) {
        rec.proj_residual_sq =
            0.5 * ((theta - kernel.y()).squaredNorm() + (theta - kernel.y_tilde()).squaredNorm());
      } else {
        rec.proj_residual_sq = (theta - kernel.y()).squaredNorm();
      }
      if (num_refs) {
        ergodic = trace.ergodic_sum / static_cast<double>(t + 1);
        double worst = -std::numeric_limits<double>::infinity();
        for (const Vector& ref : config.game_gap->references) {
          const double g = config.game_gap->gap(ergodic, ref);
          trace.reference_gaps.push_back(g);
          worst = std::max(worst, g);
        }
        rec.gap = worst;
      }
      trace.records.push_back(rec);
      note_best(t, residual_sq);
    }

    theta.swap(next);
    if (!theta.allFinite() || theta.norm() > config.divergence_threshold) {
      trace.diverged = true;
      ++t;
      break;
    }
  }
  trace.iterations = t;
  trace.final_theta = theta;

  // Final state row.
  TraceRecord last;
  last.iter = t;
  spec.evaluate(theta, f_exact);
  last.residual_sq = f_exact.squaredNorm();
  last.dist_sq = dist_sq(theta);
  last.diverged = trace.diverged;
  if (!trace.records.empty() && trace.records.back().iter == t) trace.records.pop_back();
  trace.records.push_back(last);
  if (num_refs) {
    trace.reference_gaps.resize(trace.records.size() * num_refs, std::numeric_limits<double>::quiet_NaN());
  }
  if (!trace.diverged) note_best(t, last.residual_sq);
  return trace;
}

}  // namespace rampage
