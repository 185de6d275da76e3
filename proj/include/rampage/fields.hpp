#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rampage/sampling.hpp"

namespace rampage {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using VectorRef = Eigen::Ref<Vector>;
using ConstVectorRef = Eigen::Ref<const Vector>;

/// Known regularity constants of an operator. Unset means "unknown".
///
/// For the nonlinear zoo fields these are inputs, not derived; values that
/// came from sampled difference quotients carry `estimated = true`.
struct RegularityProfile {
  std::optional<double> lipschitz;           // L
  std::optional<double> cocoercivity;        // mu
  std::optional<double> cohypomonotonicity;  // rho
  std::optional<double> l0;
  std::optional<double> l1;
  std::optional<double> alpha;
  bool estimated = false;

  /// Throws ContractViolation on out-of-range values or L > 1/mu.
  void validate() const;
};

enum class FieldKind { Polynomial10, RotationalGame, Game2d, Affine, BilinearGame, Quadratic, Custom };

const char* to_string(FieldKind kind);
FieldKind field_kind_from_string(const std::string& name);

/// Evaluation rule for FieldKind::Custom. Must write F(theta) into `out`.
using EvalRule = std::function<void(const ConstVectorRef& theta, VectorRef out)>;

/// A vector field F: R^p -> R^p plus its regularity profile.
///
/// Closed forms:
///   Polynomial10    F_i = t_i + 5 t_i^3 - 6 t_i^2, p = 10
///   RotationalGame  F = M t + (0.005 w) .* sin(w .* t), M block-diagonal
///   Game2d          F = M t + 0.04 .* sin(w .* t),   M = [[0,-1],[1,0]]
///   Affine          F = A t + b
///   BilinearGame    t = (x, z), F = (A z, -A^T x)   for f(x, z) = x^T A z
///   Quadratic       F = H t
class FieldSpec {
 public:
  static FieldSpec polynomial10();
  /// p = 2 * num_blocks. beta and omega are linearly spaced with both endpoints;
  /// a single block takes the lower endpoints.
  static FieldSpec rotational_game(int num_blocks = 10);
  static FieldSpec game2d(double omega = 25.0);
  static FieldSpec affine(Matrix a, Vector b);
  static FieldSpec identity(int dimension);
  static FieldSpec bilinear_game(Matrix coupling);
  static FieldSpec quadratic(Matrix h);
  static FieldSpec custom(std::string name, int dimension, EvalRule rule);

  FieldKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  const std::string& name() const { return name_; }

  const RegularityProfile& profile() const { return profile_; }
  FieldSpec& set_profile(RegularityProfile profile);

  /// Hot path: writes F(theta) into `out` without allocating (Custom aside).
  void evaluate(const ConstVectorRef& theta, VectorRef out) const;
  Vector operator()(const ConstVectorRef& theta) const;

  // Kind-specific data. Empty when not applicable.
  const Matrix& matrix() const { return matrix_; }       // A, H, M, or coupling
  const Vector& offset() const { return offset_; }       // b for Affine
  const Vector& frequency() const { return frequency_; }  // w
  const Vector& amplitude() const { return amplitude_; }  // sine amplitude per coordinate
  /// Block sizes (n, m) of a BilinearGame.
  int x_dimension() const;
  int z_dimension() const;

  /// A root of F when one is known in closed form (zero for the games, zero
  /// for Polynomial10, solution of A t = -b for invertible Affine).
  std::optional<Vector> known_root() const;

 private:
  FieldSpec() = default;

  FieldKind kind_ = FieldKind::Custom;
  int dimension_ = 0;
  std::string name_;
  Matrix matrix_;
  Vector offset_;
  Vector frequency_;
  Vector amplitude_;
  EvalRule rule_;
  RegularityProfile profile_;
};

/// F(theta). Throws ContractViolation on dimension mismatch.
Vector eval_field(const FieldSpec& spec, const ConstVectorRef& theta);

FieldSpec build_rotational_game(int num_blocks = 10);

// ---------------------------------------------------------------------------
// Feasible sets

struct WholeSpace {};
struct Box {
  Vector lower;
  Vector upper;
};
struct Ball {
  Vector center;
  double radius = 1.0;
};

class FeasibleSet {
 public:
  FeasibleSet() = default;  // whole space
  static FeasibleSet whole_space() { return FeasibleSet(); }
  static FeasibleSet box(Vector lower, Vector upper);
  static FeasibleSet ball(Vector center, double radius);

  bool is_whole_space() const { return std::holds_alternative<WholeSpace>(set_); }
  const std::variant<WholeSpace, Box, Ball>& get() const { return set_; }

  /// Euclidean projection in place.
  void project_in_place(VectorRef theta) const;
  bool contains(const ConstVectorRef& theta, double tol = 1e-12) const;
  /// Dimension implied by the set, or nullopt for the whole space.
  std::optional<int> dimension() const;

 private:
  std::variant<WholeSpace, Box, Ball> set_;
};

Vector project(const FeasibleSet& set, const ConstVectorRef& theta);

// ---------------------------------------------------------------------------
// Stochastic first-order oracle

struct NoiseModel {
  enum class Kind { Exact, Gaussian };
  Kind kind = Kind::Exact;
  double sigma = 0.0;  // total standard deviation; per coordinate sigma / sqrt(p)

  static NoiseModel exact() { return {}; }
  static NoiseModel gaussian(double sigma);
  bool is_exact() const { return kind == Kind::Exact || sigma == 0.0; }
};

/// F(theta) + xi with E[xi] = 0 and E|xi|^2 = sigma^2. Exact noise returns
/// eval_field bit-identically and consumes no draws.
Vector sfo_sample(const FieldSpec& spec, const NoiseModel& noise, const ConstVectorRef& theta,
                  RandomStream& rng);
void sfo_sample_into(const FieldSpec& spec, const NoiseModel& noise, const ConstVectorRef& theta,
                     RandomStream& rng, VectorRef out);

// ---------------------------------------------------------------------------
// Finite-difference derivative oracles (central differences)

/// 1e-4 * (1 + |theta|).
double default_fd_step(const ConstVectorRef& theta);

/// (F(t + h v) - F(t - h v)) / (2h) ~ J(t) v.
Vector jacobian_action_fd(const FieldSpec& spec, const ConstVectorRef& theta, const ConstVectorRef& v,
                          double h);
/// (F(t + h v) - 2 F(t) + F(t - h v)) / h^2 ~ d2F(t)[v, v].
Vector hessian_quadratic_fd(const FieldSpec& spec, const ConstVectorRef& theta,
                            const ConstVectorRef& v, double h);

/// Largest singular value by power iteration on A^T A.
double spectral_norm(const Matrix& a, int max_iters = 1000, double tol = 1e-14);

/// Sampled difference-quotient lower estimate of L over a ball around `center`.
/// Result is flagged as an estimate, never a certificate.
double estimate_lipschitz(const FieldSpec& spec, const ConstVectorRef& center, double radius,
                          int samples, RandomStream& rng);

/// Profile with L filled in: exact spectral norm for linear kinds, sampled
/// estimate (flagged) for the nonlinear zoo.
RegularityProfile default_profile(const FieldSpec& spec, std::uint64_t seed = 0);

}  // namespace rampage
