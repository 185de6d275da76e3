#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rampage/fields.hpp"
#include "rampage/solvers.hpp"

namespace rampage {

enum class Regime {
  CoCoercive_RAMPAGE,
  CoHypo_RAMPAGE,
  AlphaSym_RAMPAGE,
  SS_RAMPAGE,
  CoCoercive_RAMPAGE_PLUS,
  CoHypo_RAMPAGE_PLUS,
  AlphaSym_RAMPAGE_PLUS,
  SS_RAMPAGE_PLUS,
  Game_RAMPAGE,
  Game_RAMPAGE_PLUS,
  SFO_Game_RAMPAGE,
  SFO_Game_RAMPAGE_PLUS,
};

const char* to_string(Regime regime);
Regime regime_from_string(const std::string& name);
/// True for the antithetic regimes, whose bounds hold per realization.
bool is_deterministic_bound(Regime regime);

inline constexpr double kSfoConstantRampage = 4.4;
inline constexpr double kSfoConstantRampagePlus = 22.0 / 3.0;

struct RateParams {
  double eta = 0.0;  // step size (nu for the alpha-symmetric regimes)
  std::optional<double> lipschitz;
  std::optional<double> cocoercivity;
  std::optional<double> cohypomonotonicity;
  // alpha-symmetric constants
  std::optional<double> k0, k1, k2, alpha;
};

/// Descent constant of a regime and whether the step satisfies its
/// hypotheses.
///
///   CoCoercive_RAMPAGE       eta^2 (1 - 2 L^2 eta^2),     eta <= min(2 mu, 1/(sqrt2 L))
///   CoHypo_RAMPAGE           1/2 - 2 rho/eta - (4/3) L^2 (eta^2 + 2 eta rho + 2 (eta + 2 rho)^2)
///   CoCoercive_RAMPAGE_PLUS  eta^2 (1 - 3 eta^2 L^2),     eta <= min(2 mu, 1/(sqrt3 L))
///   CoHypo_RAMPAGE_PLUS      3/4 - 2 rho/eta - 16 L^2 (rho + eta/2)^2 - 4 L^2 eta (rho + eta/2)
///   SS_*                     1 - 4 eta^2 L^2,             eta < 1/(2L)
///   AlphaSym_*               nu bound, admissible when nu <= bound
///   Game_*, SFO_Game_*       1 / (2 eta), the coefficient of |theta0 - theta|^2 / (k+1)
struct RateCertificate {
  Regime regime = Regime::CoCoercive_RAMPAGE;
  double eta = 0.0;
  double constant = 0.0;
  bool admissible = false;
  std::optional<double> step_bound;
  std::string note;
};

/// Throws NotComputable when a parameter the regime needs is missing.
RateCertificate rate_constant(Regime regime, const RateParams& params);

// ---------------------------------------------------------------------------
// Bound checking over traces

enum class BoundMode { Expectation, PerRealization };

struct BoundReport {
  std::string label;
  BoundMode mode = BoundMode::Expectation;
  bool checkable = true;
  bool vacuous = false;  // non-positive constant, bound is +infinity
  std::size_t trials = 0;
  std::int64_t checked_points = 0;
  std::int64_t violations = 0;
  std::int64_t worst_k = -1;
  double max_excess = -std::numeric_limits<double>::infinity();  // max(value - bound)
  double max_excess_se = -std::numeric_limits<double>::infinity();  // Expectation mode, in SEs
  double se_multiplier = 4.0;
  std::string note;

  bool passed() const { return checkable && violations == 0; }
};

/// Streaming check of series_k <= bound(k).
///
/// Expectation mode averages the series over trials at each k and allows
/// `se_multiplier` standard errors. PerRealization mode checks every series,
/// allowing only rounding slack rel_tol * max(1, |bound|).
class BoundChecker {
 public:
  BoundChecker(std::function<double(std::int64_t k)> bound, BoundMode mode, double se_multiplier = 4.0,
               double rel_tol = 1e-12);

  /// Adds one realization: values[i] observed at k = iters[i]. NaN entries are skipped.
  void add(const std::vector<std::int64_t>& iters, const std::vector<double>& values);
  void mark_not_checkable(const std::string& why);
  BoundReport report() const;

 private:
  struct Cell {
    std::int64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::function<double(std::int64_t)> bound_;
  BoundMode mode_;
  double se_multiplier_;
  double rel_tol_;
  std::vector<Cell> cells_;
  std::size_t trials_ = 0;
  BoundReport per_realization_;
  bool checkable_ = true;
  std::string note_;
};

enum class TraceColumn { ResidualSq, ProjResidualSq, DistSq, Gap };

/// Running average (1/(k+1)) sum_{l<=k} column_l over the in-loop records.
/// Requires record stride 1.
void running_mean_series(const Trace& trace, TraceColumn column, std::vector<std::int64_t>& iters,
                         std::vector<double>& values);

/// Checks the regime's min-residual bound |theta0 - theta*|^2 / (C (k+1)) on
/// the running average of |F(theta_l)|^2, or of the projection residual
/// |theta_l - y_l|^2 for the SS regimes. Expectation mode for the
/// single-sample regimes, per realization for the antithetic ones. Traces with
/// stride > 1 make the report not checkable.
BoundReport residual_bound_check(const std::vector<Trace>& traces, const RateCertificate& certificate,
                                 const Vector& theta0, const Vector& theta_star);
/// Streaming form of residual_bound_check.
BoundChecker make_residual_checker(const RateCertificate& certificate, double initial_dist_sq);
void add_residual_trace(BoundChecker& checker, const Trace& trace, Regime regime);

/// Per-step descent |theta_{l+1} - theta*|^2 <= |theta_l - theta*|^2 - C m_l,
/// with m_l the residual (or projection residual, summed over the antithetic
/// pair for SS_RAMPAGE_PLUS). Needs stride 1 and dist_sq recorded.
struct DescentReport {
  std::int64_t steps = 0;
  std::int64_t violations = 0;
  double max_excess = -std::numeric_limits<double>::infinity();
  bool checkable = true;
};
DescentReport descent_check(const Trace& trace, const RateCertificate& certificate, double rel_tol = 1e-12);

// ---------------------------------------------------------------------------
// Gap metrics

struct GapEstimate {
  double bound = 0.0;
  double residual_norm = 0.0;  // |r_l| with r_l = theta_l - Proj(theta_l - eta F(theta_l))
  double field_norm = 0.0;     // |F(theta_l)|
  double d_b = 0.0;
  double g_b = 0.0;
  std::string reference_set;
  Vector z;
};

/// |r_l| (G + D_B / eta) with G = g_b when supplied, else |F(theta_l)|.
GapEstimate restricted_gap_bound(const FieldSpec& spec, const FeasibleSet& set, const ConstVectorRef& theta,
                                 double eta, double d_b, std::optional<double> g_b = std::nullopt,
                                 std::string reference_set = "");

/// Best-iterate gap bound for SS-RAMPAGE at the realized step 2 eta u:
/// (G + D / (2 eta u)) |theta0 - theta*| / sqrt(C_SS (k + 1)).
double ss_rampage_gap_corollary(double g_b, double d_b, double eta, double u, double lipschitz,
                                double initial_dist, std::int64_t k);
/// (G + D / eta) sqrt2 |theta0 - theta*| / sqrt(C_SS (k + 1)).
double ss_rampage_plus_gap_corollary(double g_b, double d_b, double eta, double lipschitz,
                                     double initial_dist, std::int64_t k);

/// Running suprema of sup_v |theta_l - v| and |F(theta_l)| along a trajectory.
struct GapSuprema {
  double d_b = 0.0;
  double g_b = 0.0;
  void update(const ConstVectorRef& theta, const ConstVectorRef& f, const std::vector<Vector>& references);
};

/// f(x_c, z_ref) - f(x_ref, z_c) for f(x, z) = x^T A z.
double duality_gap_bilinear(const Matrix& a, const ConstVectorRef& candidate, const ConstVectorRef& reference);

/// Known saddle plus the corners of the box [lower, upper].
std::vector<Vector> game_references(const Vector& saddle, const Vector& lower, const Vector& upper);
/// Gap callback for a bilinear game field.
GameGap bilinear_game_gap(const FieldSpec& spec, std::vector<Vector> references);

/// y-bar_k for single-sample methods, theta-hat_k for antithetic ones.
Vector ergodic_average(const Trace& trace, Method method);
Vector ergodic_average(const std::vector<Vector>& midpoints, const std::vector<Vector>* antithetic = nullptr);

/// Streaming ergodic-gap check: reference r's gap column against
/// |theta0 - ref_r|^2 / (2 eta (k + 1)) + floor.
class GameGapChecker {
 public:
  GameGapChecker(double eta, const Vector& theta0, const std::vector<Vector>& references, BoundMode mode,
                 double floor = 0.0, double se_multiplier = 4.0);
  void add(const Trace& trace);
  BoundReport report() const;

 private:
  std::vector<BoundChecker> checkers_;
  BoundMode mode_;
};

/// Ergodic bound |theta0 - ref|^2 / (2 eta (k + 1)) + floor on each reference
/// gap column.
BoundReport game_gap_check(const std::vector<Trace>& traces, double eta, const Vector& theta0,
                           const std::vector<Vector>& references, BoundMode mode, double floor = 0.0);

struct NoiseFloor {
  double value = 0.0;
  bool admissible = false;
  double step_bound = 0.0;
};

/// eta (2 + eta^2 L^2 4.4) sigma^2 / 2 for RAMPAGE, eta (3/2 + eta^2 L^2 22/3) sigma^2 / 2
/// for RAMPAGE+. `method` is one of the SFO game methods (or RAMPAGE / RAMPAGE_PLUS).
NoiseFloor sfo_noise_floor(Method method, double eta, double lipschitz, double sigma);

// ---------------------------------------------------------------------------
// alpha-symmetric residual conversion

/// M(x) = (nu x / (K0 + C x^alpha))^2.
double alpha_m(double x, double nu, double k0, double c_alpha, double alpha);
/// Inverse of M: closed form at alpha = 1/2, bisection otherwise.
double alpha_m_inverse(double y, double nu, double k0, double c_alpha, double alpha);
/// min_l E|F(theta_l)| <= M^{-1}(4 |theta0 - theta*|^2 / (k + 1)). Requires
/// alpha <= 1/2 (Jensen); otherwise NotComputable.
double alpha_residual_bound(const StepSizeSchedule& schedule, double initial_dist_sq, std::int64_t k);

}  // namespace rampage
