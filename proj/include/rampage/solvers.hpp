#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rampage/fields.hpp"
#include "rampage/sampling.hpp"

namespace rampage {

enum class Method {
  EG,
  RAMPAGE,
  RAMPAGE_PLUS,
  SS_RAMPAGE,
  SS_RAMPAGE_PLUS,
  SFO_RAMPAGE_GAME,
  SFO_RAMPAGE_PLUS_GAME,
};

const char* to_string(Method method);
Method method_from_string(const std::string& name);

bool is_projected(Method method);
bool is_stochastic_oracle(Method method);
/// True for the antithetic-pair methods (RAMPAGE+, SS-RAMPAGE+, SFO RAMPAGE+).
bool is_antithetic(Method method);

/// C_alpha = K1 + 2^(alpha / (1 - alpha)) K2.
double alpha_constant(double k1, double k2, double alpha);

class StepSizeSchedule {
 public:
  static StepSizeSchedule constant(double eta);
  /// eta_t = nu / (K0 + C_alpha |F(theta_t)|^alpha). When `c_alpha` is given it
  /// must agree with alpha_constant(k1, k2, alpha).
  static StepSizeSchedule adaptive_alpha(double nu, double k0, double k1, double k2, double alpha,
                                         std::optional<double> c_alpha = std::nullopt);

  bool is_constant() const { return constant_; }
  double eta() const { return eta_; }
  double nu() const { return nu_; }
  double k0() const { return k0_; }
  double k1() const { return k1_; }
  double k2() const { return k2_; }
  double alpha() const { return alpha_; }
  double c_alpha() const { return c_alpha_; }

  /// Step size for the current residual norm |F(theta_t)|.
  double step(double residual_norm) const;

 private:
  bool constant_ = true;
  double eta_ = 0.1;
  double nu_ = 0, k0_ = 0, k1_ = 0, k2_ = 0, alpha_ = 0.5, c_alpha_ = 0;
};

/// nu / (K0 + C_alpha r^alpha). Throws NotComputable when K0 = 0 and r = 0.
double adaptive_stepsize(const StepSizeSchedule& schedule, double residual_norm);

/// Admissible upper bound on nu for the alpha-symmetric rates.
///
/// RAMPAGE:  min{ C/(8(C+K1)),        C (1/(8(C-K1)))^(1-alpha) }
/// RAMPAGE+: min{ sqrt6 C/(16(C+K1)), C (sqrt6/(16(C-K1)))^(1-alpha) }
///
/// With K1 = K2 = 0 returns the Lipschitz-limit constant (1/8 or sqrt6/16);
/// the caller divides by K0. K2 = 0 < K1 zeroes C - K1 and is NotComputable.
double nu_bound(Method method, double k0, double k1, double k2, double alpha);

// ---------------------------------------------------------------------------
// Step kernels. `theta` is never aliased with outputs.

Vector eg_step(const FieldSpec& spec, const ConstVectorRef& theta, double eta);
Vector rampage_step(const FieldSpec& spec, const ConstVectorRef& theta, double eta, double u);
Vector rampage_plus_step(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                         AntitheticDraw draw);

struct MidpointStep {
  Vector y;
  Vector next;
};

struct AntitheticStep {
  Vector y;
  Vector y_tilde;
  Vector next;
};

MidpointStep ss_rampage_step(const FieldSpec& spec, const FeasibleSet& set, const ConstVectorRef& theta,
                             double eta, double u);
AntitheticStep ss_rampage_plus_step(const FieldSpec& spec, const FeasibleSet& set,
                                    const ConstVectorRef& theta, double eta, AntitheticDraw draw);

/// Disjoint substreams for the base draw xi_t and the update draws zeta_t.
struct OracleStreams {
  RandomStream base;
  RandomStream update;

  static OracleStreams from(const RandomStream& trial_stream);
};

MidpointStep sfo_rampage_game_step(const FieldSpec& spec, const NoiseModel& noise,
                                   const ConstVectorRef& theta, double eta, double u,
                                   OracleStreams& rng);
AntitheticStep sfo_rampage_plus_game_step(const FieldSpec& spec, const NoiseModel& noise,
                                          const ConstVectorRef& theta, double eta,
                                          AntitheticDraw draw, OracleStreams& rng);

/// Allocation-free stepper used by run_solver. Holds the scratch buffers of
/// one trajectory.
class StepKernel {
 public:
  StepKernel(const FieldSpec& spec, Method method, FeasibleSet set, NoiseModel noise);

  /// Advances from theta given the base evaluation f_base (exact F(theta), or
  /// the oracle draw for SFO methods). Writes the new iterate into `next`.
  void advance(const ConstVectorRef& theta, const ConstVectorRef& f_base, double eta,
               AntitheticDraw draw, OracleStreams* rng, VectorRef next);

  /// Midpoints of the last advance. y_tilde equals y for single-sample methods.
  const Vector& y() const { return y_; }
  const Vector& y_tilde() const { return y_tilde_; }

 private:
  const FieldSpec& spec_;
  Method method_;
  FeasibleSet set_;
  NoiseModel noise_;
  Vector y_, y_tilde_, f_y_, f_y_tilde_;
};

// ---------------------------------------------------------------------------
// Driver

/// Reference points and payoff gap for game runs. `gap(candidate, reference)`
/// returns f(x_c, z_ref) - f(x_ref, z_c).
struct GameGap {
  std::vector<Vector> references;
  std::function<double(const Vector& candidate, const Vector& reference)> gap;
};

struct SolverConfig {
  Method method = Method::RAMPAGE_PLUS;
  StepSizeSchedule schedule = StepSizeSchedule::constant(0.1);
  std::int64_t max_iters = 1000;
  FeasibleSet feasible_set;
  NoiseModel noise;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;  // stream id of this run
  double divergence_threshold = 1e8;
  std::int64_t record_stride = 0;  // 0 selects default_record_stride(max_iters)
  double convergence_tolerance = 0.0;  // stop once |F|^2 < tol; 0 disables
  std::optional<GameGap> game_gap;

  void validate(const FieldSpec& spec, const ConstVectorRef& theta0) const;
  std::int64_t effective_stride() const;
};

/// 1 for budgets up to 1e4 iterations, else ceil(max_iters / 1e4).
std::int64_t default_record_stride(std::int64_t max_iters);

struct TraceRecord {
  std::int64_t iter = 0;
  double residual_sq = 0;       // |F(theta_t)|^2 (exact field)
  double dist_sq = std::numeric_limits<double>::quiet_NaN();   // |theta_t - theta*|^2
  double gap = std::numeric_limits<double>::quiet_NaN();       // max ergodic gap over references
  double step_size = std::numeric_limits<double>::quiet_NaN();
  double u = std::numeric_limits<double>::quiet_NaN();
  /// |theta_t - y_t|^2; antithetic methods use (|theta-y|^2 + |theta-y~|^2) / 2.
  double proj_residual_sq = std::numeric_limits<double>::quiet_NaN();
  bool diverged = false;
};

struct Trace {
  std::string method;
  double eta = 0;  // nominal step (constant schedule) or nu
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  std::int64_t record_stride = 1;
  std::vector<TraceRecord> records;

  std::size_t num_references = 0;
  std::vector<double> reference_gaps;  // records.size() x num_references, row-major

  std::int64_t iterations = 0;  // completed updates
  bool diverged = false;
  bool converged = false;
  Vector final_theta;
  Vector ergodic_sum;  // sum of y_t, or of (y_t + y~_t)/2 for antithetic methods
  std::int64_t best_iter = 0;
  double best_residual_sq = std::numeric_limits<double>::infinity();
  /// Largest distance to the feasible set over iterates and midpoints (0 for
  /// the whole space).
  double max_infeasibility = 0.0;

  double reference_gap(std::size_t record, std::size_t ref) const {
    return reference_gaps[record * num_references + ref];
  }
};

Trace run_solver(const FieldSpec& spec, const SolverConfig& config, const Vector& theta0,
                 const std::optional<Vector>& theta_star = std::nullopt);

}  // namespace rampage
