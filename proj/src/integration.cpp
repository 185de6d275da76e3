#include "rampage/integration.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "rampage/errors.hpp"

namespace rampage {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
void legendre(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

}  // namespace

void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw ContractViolation("gauss_legendre_01: n must be >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double p = 0.0, dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      legendre(n, x, p, dp);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    legendre(n, x, p, dp);
    const double w = 1.0 / ((1.0 - x * x) * dp * dp);
    nodes[i] = 0.5 * (1.0 - x);
    nodes[n - 1 - i] = 0.5 * (1.0 + x);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

namespace {

Vector segment_quadrature(const FieldSpec& spec, const ConstVectorRef& theta, const Vector& f,
                          double step, int n) {
  std::vector<double> x, w;
  gauss_legendre_01(n, x, w);
  Vector sum = Vector::Zero(theta.size());
  Vector point(theta.size()), value(theta.size());
  for (int i = 0; i < n; ++i) {
    point = theta - (step * x[i]) * f;
    spec.evaluate(point, value);
    sum += w[i] * value;
  }
  return sum;
}

void require_theta(const FieldSpec& spec, const ConstVectorRef& theta) {
  if (theta.size() != spec.dimension()) throw ContractViolation("theta dimension does not match the field");
}

}  // namespace

IntegralEstimate line_integral(const FieldSpec& spec, const ConstVectorRef& theta, double eta, double c,
                               int nodes) {
  require_theta(spec, theta);
  if (nodes < 2) throw ContractViolation("line_integral: nodes must be >= 2");
  if (eta < 0) throw ContractViolation("line_integral: eta must be nonnegative");
  if (!(c > 0)) throw ContractViolation("line_integral: c must be positive");
  const Vector f = spec(theta);
  IntegralEstimate est;
  est.scale = c;
  est.eta = eta;
  est.node_count = nodes;
  if (eta == 0.0) {
    est.value = f;
    return est;
  }
  est.value = segment_quadrature(spec, theta, f, c * eta, nodes);
  const Vector fine = segment_quadrature(spec, theta, f, c * eta, 2 * nodes);
  const double diff = (est.value - fine).norm();
  est.error = 2.0 * diff + 4.0 * std::numeric_limits<double>::epsilon() * fine.norm();
  return est;
}

const char* to_string(Estimator e) {
  switch (e) {
    case Estimator::EG: return "EG";
    case Estimator::RAMPAGE: return "RAMPAGE";
    case Estimator::RAMPAGE_PLUS: return "RAMPAGE_PLUS";
  }
  return "?";
}

Estimator estimator_from_string(const std::string& name) {
  if (name == "EG") return Estimator::EG;
  if (name == "RAMPAGE") return Estimator::RAMPAGE;
  if (name == "RAMPAGE_PLUS" || name == "RAMPAGE+") return Estimator::RAMPAGE_PLUS;
  throw ConfigError("unknown estimator '" + name + "'");
}

namespace {

struct Moments {
  std::int64_t n = 0;
  Vector mean;
  Vector m2;
};

// Chan et al. pairwise combination.
void merge(Moments& a, const Moments& b) {
  if (b.n == 0) return;
  if (a.n == 0) {
    a = b;
    return;
  }
  const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n);
  const double n = na + nb;
  const Vector delta = b.mean - a.mean;
  a.mean += delta * (nb / n);
  a.m2 += b.m2 + delta.cwiseProduct(delta) * (na * nb / n);
  a.n += b.n;
}

Moments sample_block(const FieldSpec& spec, const ConstVectorRef& theta, const Vector& f, double eta,
                     Estimator estimator, std::int64_t count, RandomStream rng) {
  const int p = static_cast<int>(theta.size());
  Moments m;
  m.mean = Vector::Zero(p);
  m.m2 = Vector::Zero(p);
  Vector y(p), fy(p), yt(p), fyt(p), d(p);
  for (std::int64_t i = 0; i < count; ++i) {
    const double u = rng.uniform();
    y = theta - (2.0 * eta * u) * f;
    spec.evaluate(y, fy);
    if (estimator == Estimator::RAMPAGE_PLUS) {
      yt = theta - (2.0 * eta * (1.0 - u)) * f;
      spec.evaluate(yt, fyt);
      fy = 0.5 * (fy + fyt);
    }
    ++m.n;
    d = fy - m.mean;
    m.mean += d / static_cast<double>(m.n);
    m.m2 += d.cwiseProduct(fy - m.mean);
  }
  return m;
}

EstimatorStats finish(Estimator estimator, const Moments& total, const std::vector<double>& block_vars,
                      IntegralEstimate integral) {
  EstimatorStats s;
  s.estimator = estimator;
  s.samples = total.n;
  s.mean = total.mean;
  s.bias = total.mean - integral.value;
  const double n = static_cast<double>(total.n);
  if (total.n > 1) {
    s.coord_variance = total.m2 / (n - 1.0);
    s.standard_error = (s.coord_variance / n).cwiseSqrt();
  } else {
    s.coord_variance = Vector::Zero(total.mean.size());
    s.standard_error = Vector::Zero(total.mean.size());
  }
  s.variance = s.coord_variance.sum();
  if (block_vars.size() > 1) {
    double mu = 0, m2 = 0;
    for (std::size_t i = 0; i < block_vars.size(); ++i) {
      const double d = block_vars[i] - mu;
      mu += d / static_cast<double>(i + 1);
      m2 += d * (block_vars[i] - mu);
    }
    const double b = static_cast<double>(block_vars.size());
    s.variance_se = std::sqrt(m2 / (b - 1.0) / b);
  }
  s.integral = std::move(integral);
  return s;
}

EstimatorStats eg_stats(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                        IntegralEstimate integral) {
  Moments m;
  m.n = 1;
  m.mean = spec(theta - eta * spec(theta));
  m.m2 = Vector::Zero(theta.size());
  return finish(Estimator::EG, m, {}, std::move(integral));
}

void check_args(const FieldSpec& spec, const ConstVectorRef& theta, double eta, std::int64_t samples) {
  require_theta(spec, theta);
  if (eta < 0) throw ContractViolation("estimator_stats: eta must be nonnegative");
  if (samples < 1) throw ContractViolation("estimator_stats: samples must be >= 1");
}

EstimatorStats run_stats(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                         Estimator estimator, std::int64_t samples, const RandomStream& rng,
                         bool parallel) {
  check_args(spec, theta, eta, samples);
  IntegralEstimate integral = line_integral(spec, theta, eta, 2.0, 64);
  if (estimator == Estimator::EG) return eg_stats(spec, theta, eta, std::move(integral));

  const Vector f = spec(theta);
  const std::int64_t blocks = (samples + kEstimatorBlock - 1) / kEstimatorBlock;
  std::vector<Moments> parts(static_cast<std::size_t>(blocks));
  auto body = [&](std::int64_t b) {
    const std::int64_t count = std::min(kEstimatorBlock, samples - b * kEstimatorBlock);
    parts[static_cast<std::size_t>(b)] =
        sample_block(spec, theta, f, eta, estimator, count, rng.substream(static_cast<std::uint64_t>(b)));
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t b = 0; b < blocks; ++b) body(b);
  } else {
    for (std::int64_t b = 0; b < blocks; ++b) body(b);
  }

  Moments total;
  std::vector<double> block_vars;
  block_vars.reserve(parts.size());
  for (const Moments& m : parts) {
    if (m.n > 1 && m.n == kEstimatorBlock) block_vars.push_back(m.m2.sum() / static_cast<double>(m.n - 1));
    merge(total, m);
  }
  return finish(estimator, total, block_vars, std::move(integral));
}

}  // namespace

EstimatorStats estimator_stats(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                               Estimator estimator, std::int64_t samples, const RandomStream& rng) {
  return run_stats(spec, theta, eta, estimator, samples, rng, true);
}

EstimatorStats estimator_stats_serial(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                                      Estimator estimator, std::int64_t samples,
                                      const RandomStream& rng) {
  return run_stats(spec, theta, eta, estimator, samples, rng, false);
}

LeadingOrder leading_order_prediction(const FieldSpec& spec, const ConstVectorRef& theta, double eta) {
  require_theta(spec, theta);
  const Vector f = spec(theta);
  const int p = static_cast<int>(theta.size());
  LeadingOrder out;
  const double fn = f.norm();
  if (fn == 0.0) {
    out.eg_bias = Vector::Zero(p);
    out.jf = Vector::Zero(p);
    out.hff = Vector::Zero(p);
    return out;
  }
  // Differentiate along the unit direction and rescale, so the step h keeps
  // its meaning independently of |F|.
  const Vector v = f / fn;
  const double h = default_fd_step(theta);
  out.jf = jacobian_action_fd(spec, theta, v, h) * fn;
  out.hff = hessian_quadratic_fd(spec, theta, v, h) * (fn * fn);
  const double e2 = eta * eta;
  out.eg_bias = -(e2 / 6.0) * out.hff;
  const double hh = out.hff.squaredNorm();
  out.rampage_var = e2 / 3.0 * out.jf.squaredNorm() - 2.0 / 3.0 * e2 * eta * out.jf.dot(out.hff) +
                    16.0 / 45.0 * e2 * e2 * hh;
  out.rampage_plus_var = e2 * e2 * hh / 45.0;
  return out;
}

double conservative_stability_map(double lambda, double eta, double c) {
  return 1.0 - eta * lambda + (c * eta * eta / 2.0) * lambda * lambda;
}

double skew_stability_bound(double lipschitz, double c) {
  if (!(lipschitz > 0)) throw ContractViolation("skew_stability_bound: L must be positive");
  if (!(c > 1.0)) throw NotComputable("skew_stability_bound: no stable step for c <= 1");
  return 2.0 * std::sqrt(c - 1.0) / (c * lipschitz);
}

double skew_energy_norm(const Matrix& s, double eta, double c) {
  if (s.rows() != s.cols()) throw ContractViolation("skew_energy_norm: S must be square");
  if ((s + s.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ContractViolation("skew_energy_norm: S is not skew-symmetric");
  // Eigenvalues of S^T S are the squared moduli lambda^2 of S's spectrum.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s.transpose() * s, Eigen::EigenvaluesOnly);
  double worst = 0.0;
  const double e2 = eta * eta;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double l2 = std::max(0.0, eig.eigenvalues()[i]);
    const double n2 = 1.0 - (c - 1.0) * e2 * l2 + c * c * e2 * e2 * l2 * l2 / 4.0;
    worst = std::max(worst, n2);
  }
  return std::sqrt(worst);
}

}  // namespace rampage
