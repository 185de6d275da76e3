#pragma once

#include <cstdint>
#include <string>

#include "rampage/fields.hpp"
#include "rampage/sampling.hpp"

namespace rampage {

/// Quadrature of I(c) = int_0^1 F(theta - c eta s F(theta)) ds.
struct IntegralEstimate {
  Vector value;
  double scale = 2.0;
  double eta = 0.0;
  int node_count = 0;
  double error = 0.0;  // bound on |value - value at twice the nodes|
};

/// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre_01(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Gauss-Legendre quadrature along the extrapolation segment, with the error
/// estimated against the rule of twice the order.
IntegralEstimate line_integral(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                               double c = 2.0, int nodes = 64);

enum class Estimator { EG, RAMPAGE, RAMPAGE_PLUS };

const char* to_string(Estimator estimator);
Estimator estimator_from_string(const std::string& name);

/// Monte Carlo statistics of the update field against I(2).
///
///   EG           F(theta - eta F)
///   RAMPAGE      F(theta - 2 eta u F)
///   RAMPAGE_PLUS (F(theta - 2 eta u F) + F(theta - 2 eta (1-u) F)) / 2
struct EstimatorStats {
  Estimator estimator = Estimator::EG;
  Vector mean;
  Vector bias;             // mean - I(2)
  Vector coord_variance;   // per-coordinate sample variance
  Vector standard_error;   // per-coordinate standard error of the mean
  double variance = 0.0;   // total variance (trace of the covariance)
  double variance_se = 0.0;  // batch-means standard error of `variance`
  std::int64_t samples = 0;
  IntegralEstimate integral;
};

/// Samples are drawn in fixed blocks of `kEstimatorBlock`, block b from
/// rng.substream(b), and merged in block order: the result does not depend
/// on the thread count.
inline constexpr std::int64_t kEstimatorBlock = 4096;

EstimatorStats estimator_stats(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                               Estimator estimator, std::int64_t samples, const RandomStream& rng);
/// Single-threaded reference; bit-identical to estimator_stats.
EstimatorStats estimator_stats_serial(const FieldSpec& spec, const ConstVectorRef& theta, double eta,
                                      Estimator estimator, std::int64_t samples,
                                      const RandomStream& rng);

struct LeadingOrder {
  Vector eg_bias;            // -(eta^2 / 6) H[F, F]
  double rampage_var = 0.0;  // (1/3) eta^2 |JF|^2 - (2/3) eta^3 <JF, H[F,F]> + (16/45) eta^4 |H[F,F]|^2
  double rampage_plus_var = 0.0;  // (1/45) eta^4 |H[F,F]|^2
  Vector jf;                 // J F
  Vector hff;                // H[F, F]
};

/// Finite-difference evaluation of the leading error terms.
LeadingOrder leading_order_prediction(const FieldSpec& spec, const ConstVectorRef& theta, double eta);

/// P_c(lambda) = 1 - eta lambda + (c eta^2 / 2) lambda^2.
double conservative_stability_map(double lambda, double eta, double c);

/// 2 sqrt(c - 1) / (c L). Throws NotComputable for c <= 1.
double skew_stability_bound(double lipschitz, double c);

/// Spectral norm of I - eta S + (c eta^2 / 2) S^2 for skew-symmetric S.
double skew_energy_norm(const Matrix& s, double eta, double c);

}  // namespace rampage
