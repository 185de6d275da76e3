#include "rampage/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "rampage/errors.hpp"

namespace rampage {

namespace {

Vector linspace(int n, double lo, double hi) {
  Vector out(n);
  if (n == 1) {
    out(0) = lo;
    return out;
  }
  for (int i = 0; i < n; ++i) out(i) = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

std::string dims(const char* who, Eigen::Index got, int want) {
  std::ostringstream os;
  os << who << ": dimension mismatch (got " << got << ", expected " << want << ")";
  return os.str();
}

}  // namespace

void RegularityProfile::validate() const {
  auto nonneg = [](const std::optional<double>& v) { return !v || (*v >= 0 && std::isfinite(*v)); };
  require(nonneg(lipschitz), "RegularityProfile: L must be nonnegative");
  require(nonneg(cohypomonotonicity), "RegularityProfile: rho must be nonnegative");
  require(nonneg(l0) && nonneg(l1), "RegularityProfile: L0, L1 must be nonnegative");
  require(!cocoercivity || *cocoercivity > 0, "RegularityProfile: mu must be positive");
  require(!alpha || (*alpha > 0 && *alpha <= 1), "RegularityProfile: alpha must lie in (0, 1]");
  if (cocoercivity) {
    require(lipschitz.has_value(), "RegularityProfile: mu known requires L known");
    // mu-co-coercive implies (1/mu)-Lipschitz.
    require(*lipschitz <= 1.0 / *cocoercivity * (1 + 1e-12),
            "RegularityProfile: L exceeds the 1/mu bound implied by co-coercivity");
  }
}

const char* to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::Polynomial10: return "polynomial10";
    case FieldKind::RotationalGame: return "rotational_game";
    case FieldKind::Game2d: return "game2d";
    case FieldKind::Affine: return "affine";
    case FieldKind::BilinearGame: return "bilinear_game";
    case FieldKind::Quadratic: return "quadratic";
    case FieldKind::Custom: return "custom";
  }
  return "custom";
}

FieldKind field_kind_from_string(const std::string& name) {
  for (auto k : {FieldKind::Polynomial10, FieldKind::RotationalGame, FieldKind::Game2d,
                 FieldKind::Affine, FieldKind::BilinearGame, FieldKind::Quadratic,
                 FieldKind::Custom}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown field kind '" + name + "'");
}

FieldSpec FieldSpec::polynomial10() {
  FieldSpec f;
  f.kind_ = FieldKind::Polynomial10;
  f.dimension_ = 10;
  f.name_ = "polynomial10";
  return f;
}

FieldSpec FieldSpec::rotational_game(int num_blocks) {
  require(num_blocks >= 1, "rotational_game: num_blocks must be >= 1");
  FieldSpec f;
  f.kind_ = FieldKind::RotationalGame;
  f.dimension_ = 2 * num_blocks;
  f.name_ = "rotational_game";
  const Vector beta = linspace(num_blocks, 2.0, 8.0);
  const Vector omega = linspace(num_blocks, 15.0, 45.0);
  f.matrix_ = Matrix::Zero(f.dimension_, f.dimension_);
  f.frequency_.resize(f.dimension_);
  for (int i = 0; i < num_blocks; ++i) {
    const int r = 2 * i;
    f.matrix_(r, r) = 0.1;
    f.matrix_(r, r + 1) = beta(i);
    f.matrix_(r + 1, r) = -beta(i);
    f.matrix_(r + 1, r + 1) = 0.1;
    f.frequency_(r) = omega(i);
    f.frequency_(r + 1) = omega(i);
  }
  f.amplitude_ = 0.005 * f.frequency_;
  return f;
}

FieldSpec FieldSpec::game2d(double omega) {
  FieldSpec f;
  f.kind_ = FieldKind::Game2d;
  f.dimension_ = 2;
  f.name_ = "game2d";
  f.matrix_.resize(2, 2);
  f.matrix_ << 0.0, -1.0, 1.0, 0.0;
  f.frequency_ = Vector::Constant(2, omega);
  // Amplitude is 0.04, not scaled by omega (unlike the 20d game).
  f.amplitude_ = Vector::Constant(2, 0.04);
  return f;
}

FieldSpec FieldSpec::affine(Matrix a, Vector b) {
  require(a.rows() == a.cols() && a.rows() >= 1, "affine: A must be square");
  require(b.size() == a.rows(), "affine: offset dimension must match A");
  FieldSpec f;
  f.kind_ = FieldKind::Affine;
  f.dimension_ = static_cast<int>(a.rows());
  f.name_ = "affine";
  f.matrix_ = std::move(a);
  f.offset_ = std::move(b);
  return f;
}

FieldSpec FieldSpec::identity(int dimension) {
  FieldSpec f = affine(Matrix::Identity(dimension, dimension), Vector::Zero(dimension));
  f.name_ = "identity";
  RegularityProfile p;
  p.lipschitz = 1.0;
  p.cocoercivity = 1.0;
  p.cohypomonotonicity = 0.0;
  f.profile_ = p;
  return f;
}

FieldSpec FieldSpec::bilinear_game(Matrix coupling) {
  require(coupling.rows() >= 1 && coupling.cols() >= 1, "bilinear_game: empty coupling");
  FieldSpec f;
  f.kind_ = FieldKind::BilinearGame;
  f.dimension_ = static_cast<int>(coupling.rows() + coupling.cols());
  f.name_ = "bilinear_game";
  f.matrix_ = std::move(coupling);
  return f;
}

FieldSpec FieldSpec::quadratic(Matrix h) {
  require(h.rows() == h.cols() && h.rows() >= 1, "quadratic: H must be square");
  require((h - h.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1 + h.cwiseAbs().maxCoeff()),
          "quadratic: H must be symmetric");
  FieldSpec f;
  f.kind_ = FieldKind::Quadratic;
  f.dimension_ = static_cast<int>(h.rows());
  f.name_ = "quadratic";
  f.matrix_ = std::move(h);
  return f;
}

FieldSpec FieldSpec::custom(std::string name, int dimension, EvalRule rule) {
  require(dimension >= 1, "custom: dimension must be >= 1");
  require(static_cast<bool>(rule), "custom: evaluation rule is empty");
  FieldSpec f;
  f.kind_ = FieldKind::Custom;
  f.dimension_ = dimension;
  f.name_ = std::move(name);
  f.rule_ = std::move(rule);
  return f;
}

FieldSpec& FieldSpec::set_profile(RegularityProfile profile) {
  profile.validate();
  profile_ = profile;
  return *this;
}

int FieldSpec::x_dimension() const {
  return kind_ == FieldKind::BilinearGame ? static_cast<int>(matrix_.rows()) : 0;
}
int FieldSpec::z_dimension() const {
  return kind_ == FieldKind::BilinearGame ? static_cast<int>(matrix_.cols()) : 0;
}

void FieldSpec::evaluate(const ConstVectorRef& theta, VectorRef out) const {
  if (theta.size() != dimension_) throw ContractViolation(dims("eval_field", theta.size(), dimension_));
  if (out.size() != dimension_) throw ContractViolation(dims("eval_field(out)", out.size(), dimension_));
  switch (kind_) {
    case FieldKind::Polynomial10:
      out = theta.array() + 5.0 * theta.array().cube() - 6.0 * theta.array().square();
      return;
    case FieldKind::RotationalGame:
    case FieldKind::Game2d:
      out.noalias() = matrix_ * theta;
      out.array() += amplitude_.array() * (frequency_.array() * theta.array()).sin();
      return;
    case FieldKind::Affine:
      out.noalias() = matrix_ * theta;
      out += offset_;
      return;
    case FieldKind::Quadratic:
      out.noalias() = matrix_ * theta;
      return;
    case FieldKind::BilinearGame: {
      const Eigen::Index n = matrix_.rows();
      const Eigen::Index m = matrix_.cols();
      out.head(n).noalias() = matrix_ * theta.tail(m);
      out.tail(m).noalias() = -matrix_.transpose() * theta.head(n);
      return;
    }
    case FieldKind::Custom:
      rule_(theta, out);
      return;
  }
}

Vector FieldSpec::operator()(const ConstVectorRef& theta) const {
  Vector out(dimension_);
  evaluate(theta, out);
  return out;
}

std::optional<Vector> FieldSpec::known_root() const {
  switch (kind_) {
    case FieldKind::Polynomial10:
    case FieldKind::RotationalGame:
    case FieldKind::Game2d:
    case FieldKind::BilinearGame:
    case FieldKind::Quadratic:
      return Vector::Zero(dimension_);
    case FieldKind::Affine: {
      Eigen::FullPivLU<Matrix> lu(matrix_);
      if (!lu.isInvertible()) return std::nullopt;
      return Vector(lu.solve(-offset_));
    }
    case FieldKind::Custom:
      return std::nullopt;
  }
  return std::nullopt;
}

Vector eval_field(const FieldSpec& spec, const ConstVectorRef& theta) { return spec(theta); }

FieldSpec build_rotational_game(int num_blocks) { return FieldSpec::rotational_game(num_blocks); }

// ---------------------------------------------------------------------------

FeasibleSet FeasibleSet::box(Vector lower, Vector upper) {
  require(lower.size() == upper.size() && lower.size() >= 1, "box: bound dimensions differ");
  require((lower.array() <= upper.array()).all(), "box: lower must be <= upper componentwise");
  FeasibleSet s;
  s.set_ = Box{std::move(lower), std::move(upper)};
  return s;
}

FeasibleSet FeasibleSet::ball(Vector center, double radius) {
  require(radius > 0 && std::isfinite(radius), "ball: radius must be positive");
  require(center.size() >= 1, "ball: empty center");
  FeasibleSet s;
  s.set_ = Ball{std::move(center), radius};
  return s;
}

std::optional<int> FeasibleSet::dimension() const {
  if (auto* b = std::get_if<Box>(&set_)) return static_cast<int>(b->lower.size());
  if (auto* b = std::get_if<Ball>(&set_)) return static_cast<int>(b->center.size());
  return std::nullopt;
}

void FeasibleSet::project_in_place(VectorRef theta) const {
  if (auto* box = std::get_if<Box>(&set_)) {
    if (theta.size() != box->lower.size())
      throw ContractViolation(dims("project", theta.size(), static_cast<int>(box->lower.size())));
    theta = theta.cwiseMax(box->lower).cwiseMin(box->upper);
  } else if (auto* ball = std::get_if<Ball>(&set_)) {
    if (theta.size() != ball->center.size())
      throw ContractViolation(dims("project", theta.size(), static_cast<int>(ball->center.size())));
    const double r = (theta - ball->center).norm();
    if (r > ball->radius) theta = ball->center + (ball->radius / r) * (theta - ball->center);
  }
}

bool FeasibleSet::contains(const ConstVectorRef& theta, double tol) const {
  if (auto* box = std::get_if<Box>(&set_)) {
    return ((theta.array() >= box->lower.array() - tol) && (theta.array() <= box->upper.array() + tol)).all();
  }
  if (auto* ball = std::get_if<Ball>(&set_)) {
    return (theta - ball->center).norm() <= ball->radius + tol;
  }
  return theta.allFinite();
}

Vector project(const FeasibleSet& set, const ConstVectorRef& theta) {
  Vector out = theta;
  set.project_in_place(out);
  return out;
}

// ---------------------------------------------------------------------------

NoiseModel NoiseModel::gaussian(double sigma) {
  require(sigma >= 0 && std::isfinite(sigma), "NoiseModel: sigma must be nonnegative");
  return {Kind::Gaussian, sigma};
}

void sfo_sample_into(const FieldSpec& spec, const NoiseModel& noise, const ConstVectorRef& theta,
                     RandomStream& rng, VectorRef out) {
  spec.evaluate(theta, out);
  if (noise.kind == NoiseModel::Kind::Exact) return;
  const double sd = noise.sigma / std::sqrt(static_cast<double>(spec.dimension()));
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += sd * rng.normal();
}

Vector sfo_sample(const FieldSpec& spec, const NoiseModel& noise, const ConstVectorRef& theta,
                  RandomStream& rng) {
  Vector out(spec.dimension());
  sfo_sample_into(spec, noise, theta, rng, out);
  return out;
}

// ---------------------------------------------------------------------------

double default_fd_step(const ConstVectorRef& theta) { return 1e-4 * (1.0 + theta.norm()); }

Vector jacobian_action_fd(const FieldSpec& spec, const ConstVectorRef& theta, const ConstVectorRef& v,
                          double h) {
  require(h > 0, "jacobian_action_fd: h must be positive");
  require(v.size() == theta.size(), "jacobian_action_fd: direction dimension mismatch");
  const Vector plus = spec(theta + h * v);
  const Vector minus = spec(theta - h * v);
  return (plus - minus) / (2.0 * h);
}

Vector hessian_quadratic_fd(const FieldSpec& spec, const ConstVectorRef& theta,
                            const ConstVectorRef& v, double h) {
  require(h > 0, "hessian_quadratic_fd: h must be positive");
  require(v.size() == theta.size(), "hessian_quadratic_fd: direction dimension mismatch");
  const Vector plus = spec(theta + h * v);
  const Vector mid = spec(theta);
  const Vector minus = spec(theta - h * v);
  return (plus - 2.0 * mid + minus) / (h * h);
}

double spectral_norm(const Matrix& a, int max_iters, double tol) {
  if (a.size() == 0) return 0.0;
  const Matrix ata = a.transpose() * a;
  // Deterministic start with no zero components.
  Vector v = Vector::LinSpaced(a.cols(), 1.0, 2.0).normalized();
  double lambda = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = ata * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    w /= n;
    const double next = w.dot(ata * w);
    v = std::move(w);
    if (std::abs(next - lambda) <= tol * std::max(1.0, next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double estimate_lipschitz(const FieldSpec& spec, const ConstVectorRef& center, double radius,
                          int samples, RandomStream& rng) {
  require(samples >= 1 && radius > 0, "estimate_lipschitz: bad sampling parameters");
  const int p = spec.dimension();
  double best = 0.0;
  Vector a(p), b(p), fa(p), fb(p);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < p; ++i) {
      a(i) = center(i) + radius * (2 * rng.uniform() - 1);
      b(i) = a(i) + 1e-3 * radius * (2 * rng.uniform() - 1);
    }
    const double d = (a - b).norm();
    if (d == 0) continue;
    spec.evaluate(a, fa);
    spec.evaluate(b, fb);
    best = std::max(best, (fa - fb).norm() / d);
  }
  return best;
}

RegularityProfile default_profile(const FieldSpec& spec, std::uint64_t seed) {
  RegularityProfile p = spec.profile();
  if (p.lipschitz) return p;
  switch (spec.kind()) {
    case FieldKind::Affine:
    case FieldKind::Quadratic:
    case FieldKind::BilinearGame:
      p.lipschitz = spectral_norm(spec.matrix());
      break;
    default: {
      RandomStream rng(seed, 0);
      p.lipschitz = estimate_lipschitz(spec, Vector::Zero(spec.dimension()), 1.0, 4000, rng);
      p.estimated = true;
      break;
    }
  }
  return p;
}

}  // namespace rampage
