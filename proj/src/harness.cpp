#include "rampage/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "rampage/config_io.hpp"
#include "rampage/errors.hpp"
#include "rampage/rates.hpp"

namespace rampage {

Vector default_theta0(const FieldSpec& spec) {
  switch (spec.kind()) {
    case FieldKind::Polynomial10: return Vector::Constant(spec.dimension(), 0.4);
    case FieldKind::RotationalGame:
    case FieldKind::Game2d: return Vector::Constant(spec.dimension(), 1.0);
    default: return Vector::Ones(spec.dimension());
  }
}

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::Converged: return "converged";
    case Outcome::Diverged: return "diverged";
    case Outcome::Stalled: return "stalled";
  }
  return "?";
}

Outcome classify_run(const FieldSpec& spec, const Vector& theta0, double eta, const EdgeSearchOptions& o) {
  SolverConfig cfg;
  cfg.method = o.method;
  cfg.schedule = StepSizeSchedule::constant(eta);
  cfg.max_iters = o.max_iters;
  cfg.seed = o.seed;
  cfg.divergence_threshold = o.divergence_threshold;
  cfg.convergence_tolerance = o.convergence_tolerance;
  cfg.record_stride = o.max_iters + 1;
  const Trace t = run_solver(spec, cfg, theta0);
  if (t.converged) return Outcome::Converged;
  if (t.diverged) return Outcome::Diverged;
  return Outcome::Stalled;
}

EdgeResult edge_of_stability_search(const FieldSpec& spec, const Vector& theta0, const EdgeSearchOptions& o) {
  if (!(o.eta_lo > 0) || !(o.eta_hi > o.eta_lo)) throw ContractViolation("edge search: need 0 < eta_lo < eta_hi");
  if (!(o.tol > 0)) throw ContractViolation("edge search: tol must be positive");
  EdgeResult r;
  auto probe = [&](double eta) {
    const Outcome out = classify_run(spec, theta0, eta, o);
    r.probes.emplace_back(eta, out);
    return out;
  };

  double lo = o.eta_lo, hi = o.eta_hi;
  Outcome at_lo = probe(lo);
  while (at_lo != Outcome::Converged && r.widenings < o.max_widen) {
    hi = std::min(hi, lo);
    lo *= 0.5;
    ++r.widenings;
    at_lo = probe(lo);
  }
  Outcome at_hi = probe(hi);
  while (at_hi != Outcome::Diverged && r.widenings < o.max_widen) {
    lo = at_hi == Outcome::Converged ? hi : lo;
    hi *= 2.0;
    ++r.widenings;
    at_hi = probe(hi);
  }
  if (at_lo != Outcome::Converged || at_hi != Outcome::Diverged) {
    std::ostringstream msg;
    msg << "edge search: no converge/diverge bracket after " << r.widenings << " widenings; probes:";
    for (const auto& [eta, out] : r.probes) msg << ' ' << eta << '=' << to_string(out);
    throw SearchFailed(msg.str());
  }

  auto width_ok = [&] { return hi - lo <= (o.relative_tol ? o.tol * lo : o.tol); };
  while (!width_ok()) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid) == Outcome::Converged) {
      lo = mid;
    } else {
      hi = mid;
    }
    ++r.bisections;
    if (r.bisections > 200) break;
  }
  r.eta_converge = lo;
  r.eta_diverge = hi;
  r.at_converge = classify_run(spec, theta0, lo, o);
  r.at_diverge = classify_run(spec, theta0, hi, o);
  return r;
}

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("experiment: method list is empty");
  if (step_sizes.empty() && !edge_search) throw ConfigError("experiment: no step sizes and no edge search");
  for (double eta : step_sizes)
    if (!(eta > 0) || !std::isfinite(eta)) throw ConfigError("experiment: step sizes must be positive");
  if (trials < 1) throw ConfigError("experiment: trials must be >= 1");
  if (max_iters < 0) throw ConfigError("experiment: max_iters must be nonnegative");
  if (theta0 && theta0->size() != field.dimension())
    throw ConfigError("experiment: theta0 dimension does not match the field");
  if (auto d = feasible_set.dimension(); d && *d != field.dimension())
    throw ConfigError("experiment: feasible set dimension does not match the field");
  if (references)
    for (const Vector& r : *references)
      if (r.size() != field.dimension()) throw ConfigError("experiment: reference dimension does not match the field");
  if (!(reference_box > 0)) throw ConfigError("experiment: reference_box must be positive");
}

Vector ExperimentConfig::resolved_theta0() const { return theta0 ? *theta0 : default_theta0(field); }

// ---------------------------------------------------------------------------

double quantile_sorted(const std::vector<double>& s, double q) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(s.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || s[lo] == s[hi]) return s[lo];
  if (std::isinf(s[hi])) return s[hi];
  return s[lo] + frac * (s[hi] - s[lo]);
}

IterationStats describe(std::int64_t iter, std::vector<double> values) {
  IterationStats st;
  st.iter = iter;
  st.count = static_cast<std::int64_t>(values.size());
  for (double& v : values)
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  st.mean = values.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(values.size());
  st.q10 = quantile_sorted(values, 0.1);
  st.q50 = quantile_sorted(values, 0.5);
  st.q90 = quantile_sorted(values, 0.9);
  return st;
}

TrialSummary aggregate(const std::vector<Trace>& traces) {
  TrialSummary s;
  if (traces.empty()) return s;
  s.method = traces.front().method;
  s.eta = traces.front().eta;
  s.record_stride = traces.front().record_stride;
  s.trials = static_cast<std::int64_t>(traces.size());
  std::map<std::int64_t, std::vector<double>> by_iter;
  std::vector<double> finals, bests;
  for (const Trace& t : traces) {
    if (t.record_stride != s.record_stride) throw ContractViolation("aggregate: record stride mismatch");
    if (t.method != s.method || t.eta != s.eta) throw ContractViolation("aggregate: method or eta mismatch");
    for (const TraceRecord& r : t.records) by_iter[r.iter].push_back(r.residual_sq);
    finals.push_back(t.records.empty() ? std::numeric_limits<double>::quiet_NaN() : t.records.back().residual_sq);
    bests.push_back(t.best_residual_sq);
    s.divergence_count += t.diverged ? 1 : 0;
    s.convergence_count += t.converged ? 1 : 0;
  }
  s.residual.reserve(by_iter.size());
  for (auto& [iter, vals] : by_iter) s.residual.push_back(describe(iter, std::move(vals)));
  s.final_residual = describe(traces.front().records.empty() ? 0 : traces.front().records.back().iter, finals);
  s.final_residual.iter = -1;
  s.best_residual = describe(-1, bests);
  return s;
}

// ---------------------------------------------------------------------------

std::vector<Trace> run_batch(const FieldSpec& spec, const SolverConfig& base, const Vector& theta0,
                             const std::optional<Vector>& theta_star, std::int64_t trials, bool parallel,
                             std::uint64_t first_trial) {
  base.validate(spec, theta0);
  std::vector<Trace> out(static_cast<std::size_t>(trials));
  auto body = [&](std::int64_t t) {
    SolverConfig cfg = base;
    cfg.trial = first_trial + static_cast<std::uint64_t>(t);
    out[static_cast<std::size_t>(t)] = run_solver(spec, cfg, theta0, theta_star);
  };
  if (parallel) {
    // Exceptions must not escape the parallel region.
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(trials));
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t t = 0; t < trials; ++t) {
      try {
        body(t);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
    for (const std::exception_ptr& e : errors)
      if (e) std::rethrow_exception(e);
  } else {
    for (std::int64_t t = 0; t < trials; ++t) body(t);
  }
  return out;
}

namespace {

ExperimentResult run_experiment(const ExperimentConfig& config, bool keep_traces, bool parallel) {
  config.validate();
  ExperimentResult res;
  res.config = config;
  res.theta0 = config.resolved_theta0();
  res.config_hash = rampage::config_hash(config);
  const FieldSpec& spec = config.field;

  std::vector<double> etas = config.step_sizes;
  if (config.edge_search) {
    res.edge = edge_of_stability_search(spec, res.theta0, *config.edge_search);
    etas.push_back(res.edge->eta_converge);
    etas.push_back(res.edge->eta_diverge);
  }

  std::optional<GameGap> gap;
  if (spec.kind() == FieldKind::BilinearGame) {
    std::vector<Vector> refs;
    if (config.references) {
      refs = *config.references;
    } else {
      const Vector saddle = Vector::Zero(spec.dimension());
      refs = game_references(saddle, Vector::Constant(spec.dimension(), -config.reference_box),
                             Vector::Constant(spec.dimension(), config.reference_box));
    }
    gap = bilinear_game_gap(spec, std::move(refs));
  }

  for (Method m : config.methods) {
    for (double eta : etas) {
      SolverConfig sc;
      sc.method = m;
      sc.schedule = StepSizeSchedule::constant(eta);
      sc.max_iters = config.max_iters;
      sc.feasible_set = config.feasible_set;
      sc.noise = config.noise;
      sc.seed = config.seed;
      sc.divergence_threshold = config.divergence_threshold;
      sc.record_stride = config.record_stride;
      sc.convergence_tolerance = config.convergence_tolerance;
      sc.game_gap = gap;
      MethodRun run;
      run.method = m;
      run.eta = eta;
      std::vector<Trace> traces = run_batch(spec, sc, res.theta0, spec.known_root(), config.trials, parallel);
      run.summary = aggregate(traces);
      if (keep_traces) run.traces = std::move(traces);
      res.runs.push_back(std::move(run));
    }
  }
  return res;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw ConfigError("trace csv: bad number '" + s + "'");
  return v;
}

}  // namespace

ExperimentResult run_trials(const ExperimentConfig& config, bool keep_traces) {
  return run_experiment(config, keep_traces, true);
}

ExperimentResult run_trials_serial(const ExperimentConfig& config, bool keep_traces) {
  return run_experiment(config, keep_traces, false);
}

// ---------------------------------------------------------------------------

std::string header_comment(const ArtifactHeader& h) {
  return "# seed=" + std::to_string(h.seed) + " config_hash=" + h.config_hash + " version=" + h.version;
}

void write_trace_csv(std::ostream& out, const ArtifactHeader& header, const std::vector<Trace>& traces) {
  out << header_comment(header) << '\n' << kTraceCsvHeader << '\n';
  for (const Trace& t : traces) {
    const std::string prefix = t.method + ',' + fmt(t.eta) + ',' + std::to_string(t.seed) + ',' + std::to_string(t.trial) + ',';
    for (const TraceRecord& r : t.records) {
      out << prefix << r.iter << ',' << fmt(r.residual_sq) << ',' << fmt(r.dist_sq) << ',' << fmt(r.gap) << ','
          << fmt(r.step_size) << ',' << fmt(r.u) << ',' << (r.diverged ? 1 : 0) << '\n';
    }
  }
  if (!out) throw IoError("trace csv: write failed");
}

std::vector<Trace> read_trace_csv(std::istream& in, ArtifactHeader* header) {
  std::vector<Trace> traces;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header) {
        std::istringstream ss(line.substr(1));
        std::string kv;
        while (ss >> kv) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) continue;
          const std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
          if (k == "seed") header->seed = std::stoull(v);
          if (k == "config_hash") header->config_hash = v;
          if (k == "version") header->version = v;
        }
      }
      continue;
    }
    if (!seen_header) {
      if (line != kTraceCsvHeader) throw ConfigError("trace csv: unexpected header '" + line + "'");
      seen_header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 11) throw ConfigError("trace csv: expected 11 columns in '" + line + "'");
    const double eta = parse_double(cells[1]);
    const std::uint64_t seed = std::stoull(cells[2]);
    const std::uint64_t trial = std::stoull(cells[3]);
    if (traces.empty() || traces.back().method != cells[0] || traces.back().eta != eta ||
        traces.back().seed != seed || traces.back().trial != trial) {
      Trace t;
      t.method = cells[0];
      t.eta = eta;
      t.seed = seed;
      t.trial = trial;
      traces.push_back(std::move(t));
    }
    TraceRecord r;
    r.iter = std::stoll(cells[4]);
    r.residual_sq = parse_double(cells[5]);
    r.dist_sq = parse_double(cells[6]);
    r.gap = parse_double(cells[7]);
    r.step_size = parse_double(cells[8]);
    r.u = parse_double(cells[9]);
    r.diverged = cells[10] == "1";
    traces.back().records.push_back(r);
  }
  for (Trace& t : traces) {
    const auto& rs = t.records;
    t.iterations = rs.back().iter;
    t.diverged = rs.back().diverged;
    t.record_stride = rs.size() > 2 ? rs[1].iter - rs[0].iter : 1;
  }
  return traces;
}

OutputFormat output_format_from_string(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw ConfigError("unknown format '" + name + "' (expected csv or json)");
}

namespace {

Json stats_json(const IterationStats& s) {
  return {{"iter", s.iter}, {"count", s.count}, {"mean", s.mean}, {"q10", s.q10}, {"q50", s.q50}, {"q90", s.q90}};
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(fmt(v)); }

Json trace_json(const Trace& t) {
  Json rows = Json::array();
  for (const TraceRecord& r : t.records) {
    rows.push_back({{"iter", r.iter},
                    {"residual_sq", finite_or_null(r.residual_sq)},
                    {"dist_sq", finite_or_null(r.dist_sq)},
                    {"gap", finite_or_null(r.gap)},
                    {"step_size", finite_or_null(r.step_size)},
                    {"u", finite_or_null(r.u)},
                    {"diverged", r.diverged}});
  }
  return {{"method", t.method}, {"eta", t.eta}, {"seed", t.seed}, {"trial", t.trial}, {"records", rows}};
}

Json header_json(const ArtifactHeader& h) {
  return {{"seed", h.seed}, {"config_hash", h.config_hash}, {"version", h.version}};
}

void write_file(const std::filesystem::path& path, const std::string& comment, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  if (!comment.empty()) out << comment << '\n';
  out << body;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace

std::string summary_json(const ExperimentResult& result) {
  const ArtifactHeader h{result.config.seed, result.config_hash, kArtifactVersion};
  Json j;
  j["header"] = header_json(h);
  j["config"] = to_json(result.config);
  j["theta0"] = to_json(result.theta0);
  if (result.edge) {
    const EdgeResult& e = *result.edge;
    j["edge"] = {{"eta_converge", e.eta_converge}, {"eta_diverge", e.eta_diverge},
                 {"at_converge", to_string(e.at_converge)}, {"at_diverge", to_string(e.at_diverge)},
                 {"bisections", e.bisections}, {"widenings", e.widenings}, {"sound", e.sound()}};
  }
  Json runs = Json::array();
  for (const MethodRun& r : result.runs) {
    const TrialSummary& s = r.summary;
    Json per_iter = Json::array();
    for (const IterationStats& st : s.residual) per_iter.push_back(stats_json(st));
    runs.push_back({{"method", s.method},
                    {"eta", s.eta},
                    {"trials", s.trials},
                    {"record_stride", s.record_stride},
                    {"divergence_count", s.divergence_count},
                    {"convergence_count", s.convergence_count},
                    {"final_residual", stats_json(s.final_residual)},
                    {"best_residual", stats_json(s.best_residual)},
                    {"residual", per_iter}});
  }
  j["runs"] = runs;
  std::string out = j.dump(2);
  out += '\n';
  return out;
}

std::vector<std::string> emit(const ExperimentResult& result, OutputFormat format, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
  const ArtifactHeader h{result.config.seed, result.config_hash, kArtifactVersion};
  std::vector<Trace> all;
  for (const MethodRun& r : result.runs) all.insert(all.end(), r.traces.begin(), r.traces.end());

  std::vector<std::string> paths;
  if (format == OutputFormat::Csv) {
    const fs::path p = fs::path(dir) / "traces.csv";
    std::ostringstream body;
    write_trace_csv(body, h, all);
    write_file(p, "", body.str());
    paths.push_back(p.string());
  } else {
    const fs::path p = fs::path(dir) / "traces.json";
    Json arr = Json::array();
    for (const Trace& t : all) arr.push_back(trace_json(t));
    Json doc = {{"header", header_json(h)}, {"traces", arr}};
    write_file(p, "", doc.dump(1) + "\n");
    paths.push_back(p.string());
  }
  const fs::path s = fs::path(dir) / "summary.json";
  write_file(s, "", summary_json(result));
  paths.push_back(s.string());
  return paths;
}

}  // namespace rampage
