#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rampage/fields.hpp"
#include "rampage/solvers.hpp"

namespace rampage {

inline constexpr const char* kArtifactVersion = "rampage-artifact/1";
inline constexpr const char* kTraceCsvHeader = "method,eta,seed,trial,iter,residual_sq,dist_sq,gap,step_size,u,diverged";

/// Starting point: all components 0.4 for Polynomial10, 1.0 for the two
/// rotational games, zero for the linear kinds.
Vector default_theta0(const FieldSpec& spec);

struct EdgeSearchOptions {
  Method method = Method::EG;
  double eta_lo = 0.01;
  double eta_hi = 1.0;
  double tol = 1e-3;        // bracket width
  bool relative_tol = true;  // width measured as a fraction of eta_converge
  std::int64_t max_iters = 10000;
  double convergence_tolerance = 1e-12;  // on |F|^2
  double divergence_threshold = 1e8;
  int max_widen = 8;
  std::uint64_t seed = 0;
};

enum class Outcome { Converged, Diverged, Stalled };
const char* to_string(Outcome outcome);

/// One deterministic run of `method` (trial 0) classified by outcome.
Outcome classify_run(const FieldSpec& spec, const Vector& theta0, double eta, const EdgeSearchOptions& options);

struct EdgeResult {
  double eta_converge = 0.0;
  double eta_diverge = 0.0;
  Outcome at_converge = Outcome::Converged;
  Outcome at_diverge = Outcome::Diverged;
  int bisections = 0;
  int widenings = 0;
  std::vector<std::pair<double, Outcome>> probes;

  /// The bracket has a converging lower end and a truly diverging upper end.
  bool sound() const { return at_converge == Outcome::Converged && at_diverge == Outcome::Diverged; }
};

/// Bisects on "converges within max_iters" between a converging eta_lo and a
/// diverging eta_hi (each widened up to max_widen times), then re-classifies
/// both ends. Throws SearchFailed when no bracket is found.
EdgeResult edge_of_stability_search(const FieldSpec& spec, const Vector& theta0, const EdgeSearchOptions& options);

struct ExperimentConfig {
  std::string label = "experiment";
  FieldSpec field = FieldSpec::game2d();
  std::vector<Method> methods;
  std::vector<double> step_sizes;
  std::optional<EdgeSearchOptions> edge_search;  // when set, adds eta_converge, eta_diverge
  std::int64_t trials = 100;
  std::int64_t max_iters = 10000;
  std::uint64_t seed = 0;
  std::optional<Vector> theta0;  // nullopt selects default_theta0
  std::string output_dir = ".";
  FeasibleSet feasible_set;
  NoiseModel noise;
  double divergence_threshold = 1e8;
  std::int64_t record_stride = 0;
  double convergence_tolerance = 0.0;
  /// Half-width of the reference box for game gaps (bilinear games only).
  double reference_box = 1.0;
  std::optional<std::vector<Vector>> references;

  void validate() const;
  Vector resolved_theta0() const;
};

struct IterationStats {
  std::int64_t iter = 0;
  std::int64_t count = 0;
  double mean = 0.0;
  double q10 = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
};

struct TrialSummary {
  std::string method;
  double eta = 0.0;
  std::int64_t trials = 0;
  std::int64_t record_stride = 1;
  std::vector<IterationStats> residual;  // per recorded iteration, |F|^2
  std::int64_t divergence_count = 0;
  std::int64_t convergence_count = 0;
  IterationStats final_residual;  // over each trial's last row
  IterationStats best_residual;   // over each trial's best iterate
};

/// Linear-interpolation quantile (type 7) of sorted data. NaN sorts as +inf.
double quantile_sorted(const std::vector<double>& sorted, double q);
IterationStats describe(std::int64_t iter, std::vector<double> values);

/// Traces must share method, eta and stride.
TrialSummary aggregate(const std::vector<Trace>& traces);

struct MethodRun {
  Method method = Method::EG;
  double eta = 0.0;
  TrialSummary summary;
  std::vector<Trace> traces;
};

struct ExperimentResult {
  ExperimentConfig config;
  Vector theta0;
  std::optional<EdgeResult> edge;
  std::vector<MethodRun> runs;
  std::string config_hash;
};

/// Trials run in parallel; trial t uses stream id t. Output does not depend on
/// the thread count.
ExperimentResult run_trials(const ExperimentConfig& config, bool keep_traces = true);
/// Single-threaded reference; identical output.
ExperimentResult run_trials_serial(const ExperimentConfig& config, bool keep_traces = true);

/// Runs `trials` solver instances of one configuration; trial t gets stream
/// id `first_trial + t`.
std::vector<Trace> run_batch(const FieldSpec& spec, const SolverConfig& base, const Vector& theta0,
                             const std::optional<Vector>& theta_star, std::int64_t trials, bool parallel,
                             std::uint64_t first_trial = 0);

// ---------------------------------------------------------------------------
// Emission

struct ArtifactHeader {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string version = kArtifactVersion;
};

std::string header_comment(const ArtifactHeader& header);
void write_trace_csv(std::ostream& out, const ArtifactHeader& header, const std::vector<Trace>& traces);
/// Parses a trace CSV back into traces (records, method, eta, seed, trial).
std::vector<Trace> read_trace_csv(std::istream& in, ArtifactHeader* header = nullptr);

enum class OutputFormat { Csv, Json };
OutputFormat output_format_from_string(const std::string& name);

/// Writes traces (CSV or JSON) and summary.json under `dir`; returns the paths.
std::vector<std::string> emit(const ExperimentResult& result, OutputFormat format, const std::string& dir);

std::string summary_json(const ExperimentResult& result);

}  // namespace rampage
