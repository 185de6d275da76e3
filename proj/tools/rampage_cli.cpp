// rampage: command-line front end for experiments, edge searches, estimator
// sweeps, stability maps and rate certification.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rampage/config_io.hpp"
#include "rampage/errors.hpp"
#include "rampage/fields.hpp"
#include "rampage/harness.hpp"
#include "rampage/integration.hpp"
#include "rampage/rates.hpp"
#include "rampage/solvers.hpp"

using namespace rampage;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::int64_t> trials;
  std::string format = "csv";
};

void add_common(CLI::App* app, Common& c, bool config_required) {
  auto* opt = app->add_option("--config", c.config, "JSON config file");
  if (config_required) opt->required();
  app->add_option("--seed", c.seed, "master seed (overrides config)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--trials", c.trials, "trial count (overrides config)")->check(CLI::PositiveNumber);
  app->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

std::filesystem::path ensure_dir(const std::string& dir) {
  const std::filesystem::path p(dir.empty() ? "." : dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IoError("cannot create '" + p.string() + "': " + ec.message());
  return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json number_or_string(double v) { return std::isfinite(v) ? Json(v) : Json(fmt(v)); }

ExperimentConfig load_with_overrides(const Common& c) {
  ExperimentConfig cfg = load_experiment(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.trials = *c.trials;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

// ---------------------------------------------------------------------------

int cmd_run(const Common& c) {
  const ExperimentConfig cfg = load_with_overrides(c);
  const ExperimentResult res = run_trials(cfg);
  ensure_dir(cfg.output_dir);
  for (const std::string& p : emit(res, output_format_from_string(c.format), cfg.output_dir)) std::cout << p << '\n';
  for (const MethodRun& r : res.runs) {
    std::cout << to_string(r.method) << " eta=" << fmt(r.eta) << " trials=" << r.summary.trials
              << " diverged=" << r.summary.divergence_count << " converged=" << r.summary.convergence_count
              << " median_final_residual_sq=" << fmt(r.summary.final_residual.q50) << '\n';
  }
  return 0;
}

struct EdgeArgs {
  std::string field = "game2d";
  std::string method = "EG";
  std::optional<double> eta_lo, eta_hi, tol;
  std::optional<std::int64_t> max_iters;
};

int cmd_edge(const Common& c, const EdgeArgs& a) {
  FieldSpec field = FieldSpec::game2d();
  EdgeSearchOptions opts;
  std::optional<Vector> theta0;
  std::uint64_t seed = 0;
  if (!c.config.empty()) {
    const ExperimentConfig cfg = load_experiment(c.config);
    field = cfg.field;
    if (cfg.edge_search) opts = *cfg.edge_search;
    theta0 = cfg.resolved_theta0();
    seed = cfg.seed;
  } else {
    field = field_from_json(Json(a.field));
  }
  opts.method = method_from_string(a.method);
  if (a.eta_lo) opts.eta_lo = *a.eta_lo;
  if (a.eta_hi) opts.eta_hi = *a.eta_hi;
  if (a.tol) opts.tol = *a.tol;
  if (a.max_iters) opts.max_iters = *a.max_iters;
  if (c.seed) seed = *c.seed;
  opts.seed = seed;
  const Vector t0 = theta0 ? *theta0 : default_theta0(field);

  const EdgeResult r = edge_of_stability_search(field, t0, opts);
  Json j;
  j["field"] = field.name();
  j["method"] = to_string(opts.method);
  j["eta_converge"] = r.eta_converge;
  j["eta_diverge"] = r.eta_diverge;
  j["at_converge"] = to_string(r.at_converge);
  j["at_diverge"] = to_string(r.at_diverge);
  j["sound"] = r.sound();
  j["bisections"] = r.bisections;
  j["widenings"] = r.widenings;
  Json probes = Json::array();
  for (const auto& [eta, out] : r.probes) probes.push_back({{"eta", eta}, {"outcome", to_string(out)}});
  j["probes"] = probes;
  j["seed"] = seed;
  const std::string text = j.dump(2) + '\n';
  if (c.out.empty()) {
    std::cout << text;
  } else {
    const auto path = ensure_dir(c.out) / "edge.json";
    write_text(path, text);
    std::cout << path.string() << '\n';
  }
  return 0;
}

// bias-variance sweep config:
// {"fields": ["polynomial10", ...], "thetas": [{"label": "a", "value": 0.25}],
//  "step_sizes": [...], "estimators": ["EG", ...], "samples": 100000, "seed": 0}
int cmd_bias_variance(const Common& c) {
  Json j = Json::object();
  if (!c.config.empty()) j = load_json(c.config);
  std::vector<FieldSpec> fields;
  for (const Json& f : j.value("fields", Json::array({"polynomial10"}))) fields.push_back(field_from_json(f));
  std::vector<double> etas;
  if (j.contains("step_sizes")) {
    etas = j.at("step_sizes").get<std::vector<double>>();
  } else {
    for (int e = 3; e <= 10; ++e) etas.push_back(std::ldexp(1.0, -e));
  }
  std::vector<Estimator> estimators;
  for (const Json& e : j.value("estimators", Json::array({"EG", "RAMPAGE", "RAMPAGE_PLUS"})))
    estimators.push_back(estimator_from_string(e.get<std::string>()));
  std::int64_t samples = j.value("samples", std::int64_t{100000});
  if (c.trials) samples = *c.trials;
  std::uint64_t seed = j.value("seed", std::uint64_t{0});
  if (c.seed) seed = *c.seed;
  const Json thetas = j.value("thetas", Json::array({Json{{"label", "all_0.25"}, {"value", 0.25}}}));

  Json rows = Json::array();
  std::ostringstream csv;
  csv << "# seed=" << seed << " version=" << kArtifactVersion << '\n';
  csv << "field,theta_label,eta,estimator,bias_norm,variance,predicted_bias_norm,predicted_variance,samples,seed\n";
  std::uint64_t stream = 0;
  for (const FieldSpec& f : fields) {
    for (const Json& th : thetas) {
      const std::string label = th.at("label").get<std::string>();
      const Json& v = th.at("value");
      const Vector theta = v.is_number() ? Vector::Constant(f.dimension(), v.get<double>()) : vector_from_json(v);
      if (theta.size() != f.dimension()) throw ConfigError("theta '" + label + "' does not match field " + f.name());
      for (double eta : etas) {
        const LeadingOrder lo = leading_order_prediction(f, theta, eta);
        for (Estimator e : estimators) {
          const EstimatorStats s = estimator_stats(f, theta, eta, e, samples, RandomStream(seed, stream++));
          const double pred_bias = e == Estimator::EG ? lo.eg_bias.norm() : 0.0;
          const double pred_var = e == Estimator::EG ? 0.0
                                  : e == Estimator::RAMPAGE ? lo.rampage_var
                                                            : lo.rampage_plus_var;
          csv << f.name() << ',' << label << ',' << fmt(eta) << ',' << to_string(e) << ',' << fmt(s.bias.norm())
              << ',' << fmt(s.variance) << ',' << fmt(pred_bias) << ',' << fmt(pred_var) << ',' << s.samples << ','
              << seed << '\n';
          rows.push_back({{"field", f.name()},
                          {"theta_label", label},
                          {"eta", eta},
                          {"estimator", to_string(e)},
                          {"bias_norm", number_or_string(s.bias.norm())},
                          {"variance", number_or_string(s.variance)},
                          {"predicted_bias_norm", number_or_string(pred_bias)},
                          {"predicted_variance", number_or_string(pred_var)},
                          {"samples", s.samples},
                          {"seed", seed}});
        }
      }
    }
  }
  std::string text;
  std::string name;
  if (c.format == "json") {
    Json doc;
    doc["header"] = {{"seed", seed}, {"version", kArtifactVersion}};
    doc["rows"] = rows;
    text = doc.dump(2) + '\n';
    name = "bias_variance.json";
  } else {
    text = csv.str();
    name = "bias_variance.csv";
  }
  if (c.out.empty()) {
    std::cout << text;
  } else {
    const auto path = ensure_dir(c.out) / name;
    write_text(path, text);
    std::cout << path.string() << '\n';
  }
  return 0;
}

struct StabilityArgs {
  double lipschitz = 1.0;
  std::vector<double> scales = {1.0, 1.5, 2.0, 3.0, 4.0};
  double eta_max = 2.0;
  int points = 41;
};

int cmd_stability(const Common& c, const StabilityArgs& a) {
  if (!(a.lipschitz > 0) || a.points < 2 || !(a.eta_max > 0)) throw ConfigError("stability: bad grid");
  Matrix s(2, 2);
  s << 0, -a.lipschitz, a.lipschitz, 0;
  std::ostringstream csv;
  csv << "# version=" << kArtifactVersion << '\n';
  csv << "c,eta,skew_energy_norm,conservative_map,step_bound\n";
  Json rows = Json::array();
  for (double cs : a.scales) {
    double bound = NAN;
    try {
      bound = skew_stability_bound(a.lipschitz, cs);
    } catch (const NotComputable&) {
    }
    for (int i = 0; i < a.points; ++i) {
      const double eta = a.eta_max * i / (a.points - 1);
      const double norm = skew_energy_norm(s, eta, cs);
      const double cons = conservative_stability_map(a.lipschitz, eta, cs);
      csv << fmt(cs) << ',' << fmt(eta) << ',' << fmt(norm) << ',' << fmt(cons) << ',' << fmt(bound) << '\n';
      rows.push_back({{"c", cs},
                      {"eta", eta},
                      {"skew_energy_norm", norm},
                      {"conservative_map", cons},
                      {"step_bound", number_or_string(bound)}});
    }
  }
  std::string text = csv.str(), name = "stability.csv";
  if (c.format == "json") {
    Json doc;
    doc["header"] = {{"version", kArtifactVersion}, {"lipschitz", a.lipschitz}};
    doc["rows"] = rows;
    text = doc.dump(2) + '\n';
    name = "stability.json";
  }
  if (c.out.empty()) {
    std::cout << text;
  } else {
    const auto path = ensure_dir(c.out) / name;
    write_text(path, text);
    std::cout << path.string() << '\n';
  }
  return 0;
}

struct CertifyArgs {
  std::string traces;
  std::string regime;
  std::optional<double> lipschitz, mu, rho, sigma;
  bool strict = false;
};

Json report_json(const BoundReport& r) {
  return {{"label", r.label},
          {"mode", r.mode == BoundMode::Expectation ? "expectation" : "per_realization"},
          {"checkable", r.checkable},
          {"vacuous", r.vacuous},
          {"trials", r.trials},
          {"checked_points", r.checked_points},
          {"violations", r.violations},
          {"worst_k", r.worst_k},
          {"max_excess", number_or_string(r.max_excess)},
          {"max_excess_se", number_or_string(r.max_excess_se)},
          {"note", r.note},
          {"passed", r.passed()}};
}

int cmd_certify(const Common& c, const CertifyArgs& a) {
  const ExperimentConfig cfg = load_with_overrides(c);
  std::ifstream in(a.traces, std::ios::binary);
  if (!in) throw IoError("cannot read '" + a.traces + "'");
  ArtifactHeader header;
  const std::vector<Trace> traces = read_trace_csv(in, &header);
  if (traces.empty()) throw ConfigError("certify: trace file has no rows");

  const Regime regime = regime_from_string(a.regime);
  const Vector theta0 = cfg.resolved_theta0();
  Json out;
  out["regime"] = to_string(regime);
  out["field"] = cfg.field.name();
  out["trace_seed"] = header.seed;
  out["trace_config_hash"] = header.config_hash;

  // Group traces by (method, eta) and certify each group.
  std::map<std::pair<std::string, double>, std::vector<Trace>> groups;
  for (const Trace& t : traces) groups[{t.method, t.eta}].push_back(t);
  Json results = Json::array();
  bool all_passed = true;
  for (const auto& [key, group] : groups) {
    RateParams p;
    p.eta = key.second;
    p.lipschitz = a.lipschitz ? a.lipschitz : cfg.field.profile().lipschitz;
    p.cocoercivity = a.mu ? a.mu : cfg.field.profile().cocoercivity;
    p.cohypomonotonicity = a.rho ? a.rho : cfg.field.profile().cohypomonotonicity;
    const RateCertificate cert = rate_constant(regime, p);
    Json g;
    g["method"] = key.first;
    g["eta"] = key.second;
    g["constant"] = number_or_string(cert.constant);
    g["admissible"] = cert.admissible;
    BoundReport rep;
    if (regime == Regime::SS_RAMPAGE || regime == Regime::SS_RAMPAGE_PLUS) {
      rep.checkable = false;
      rep.note = "projection residual is not part of the trace CSV; certify SS runs in process";
    } else if (regime == Regime::Game_RAMPAGE || regime == Regime::Game_RAMPAGE_PLUS ||
               regime == Regime::SFO_Game_RAMPAGE || regime == Regime::SFO_Game_RAMPAGE_PLUS) {
      std::vector<Vector> refs;
      if (cfg.references) {
        refs = *cfg.references;
      } else {
        const Eigen::Index d = cfg.field.dimension();
        refs = game_references(Vector::Zero(d), Vector::Constant(d, -cfg.reference_box),
                               Vector::Constant(d, cfg.reference_box));
      }
      double d2 = 0;
      for (const Vector& r : refs) d2 = std::max(d2, (theta0 - r).squaredNorm());
      double floor = 0;
      if (regime == Regime::SFO_Game_RAMPAGE || regime == Regime::SFO_Game_RAMPAGE_PLUS) {
        const Method m = regime == Regime::SFO_Game_RAMPAGE ? Method::SFO_RAMPAGE_GAME : Method::SFO_RAMPAGE_PLUS_GAME;
        floor = sfo_noise_floor(m, key.second, p.lipschitz.value_or(0.0), a.sigma ? *a.sigma : cfg.noise.sigma).value;
      }
      const double eta = key.second;
      const BoundMode mode = is_deterministic_bound(regime) ? BoundMode::PerRealization : BoundMode::Expectation;
      BoundChecker checker([=](std::int64_t k) { return d2 / (2.0 * eta * static_cast<double>(k + 1)) + floor; },
                           mode);
      for (const Trace& t : group) {
        std::vector<std::int64_t> ks;
        std::vector<double> vals;
        for (const TraceRecord& r : t.records) {
          ks.push_back(r.iter);
          vals.push_back(r.gap);
        }
        checker.add(ks, vals);
      }
      rep = checker.report();
      rep.note = "max gap over references against the largest reference bound";
    } else {
      const std::optional<Vector> star = cfg.field.known_root();
      if (!star) throw NotComputable("certify: field has no known root");
      rep = residual_bound_check(group, cert, theta0, *star);
      if (cert.regime == Regime::CoCoercive_RAMPAGE_PLUS || cert.regime == Regime::CoHypo_RAMPAGE_PLUS) {
        std::int64_t steps = 0, violations = 0;
        for (const Trace& t : group) {
          const DescentReport d = descent_check(t, cert);
          steps += d.steps;
          violations += d.violations;
        }
        g["descent"] = {{"steps", steps}, {"violations", violations}};
        all_passed = all_passed && violations == 0;
      }
    }
    rep.label = key.first;
    g["report"] = report_json(rep);
    all_passed = all_passed && rep.passed();
    results.push_back(g);
  }
  out["results"] = results;
  out["passed"] = all_passed;
  const std::string text = out.dump(2) + '\n';
  if (c.out.empty()) {
    std::cout << text;
  } else {
    const auto path = ensure_dir(c.out) / "certify.json";
    write_text(path, text);
    std::cout << path.string() << '\n';
  }
  return a.strict && !all_passed ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rampage: randomized midpoint extragradient experiments"};
  app.set_version_flag("--version", std::string(RAMPAGE_VERSION));
  app.require_subcommand(1);

  Common run_c, edge_c, bv_c, stab_c, cert_c;
  auto* run = app.add_subcommand("run", "run the trials of an experiment config and emit traces");
  add_common(run, run_c, true);

  EdgeArgs edge_a;
  auto* edge = app.add_subcommand("edge", "edge-of-stability step-size search");
  add_common(edge, edge_c, false);
  edge->add_option("--field", edge_a.field, "field name when no config is given");
  edge->add_option("--method", edge_a.method, "method to probe");
  edge->add_option("--eta-lo", edge_a.eta_lo, "lower bracket end");
  edge->add_option("--eta-hi", edge_a.eta_hi, "upper bracket end");
  edge->add_option("--tol", edge_a.tol, "bracket width (relative)");
  edge->add_option("--max-iters", edge_a.max_iters, "iteration budget per probe");

  auto* bv = app.add_subcommand("bias-variance", "estimator bias and variance sweep");
  add_common(bv, bv_c, false);

  StabilityArgs stab_a;
  auto* stab = app.add_subcommand("stability", "skew and conservative stability maps");
  add_common(stab, stab_c, false);
  stab->add_option("--lipschitz", stab_a.lipschitz, "rotation speed L");
  stab->add_option("--c", stab_a.scales, "integration scales");
  stab->add_option("--eta-max", stab_a.eta_max, "largest step on the grid");
  stab->add_option("--points", stab_a.points, "grid points per scale");

  CertifyArgs cert_a;
  auto* cert = app.add_subcommand("certify", "check rate bounds on emitted traces");
  add_common(cert, cert_c, true);
  cert->add_option("--traces", cert_a.traces, "trace CSV written by run")->required();
  cert->add_option("--regime", cert_a.regime, "regime name, e.g. CoCoercive_RAMPAGE")->required();
  cert->add_option("--lipschitz", cert_a.lipschitz, "L (defaults to the field profile)");
  cert->add_option("--mu", cert_a.mu, "co-coercivity");
  cert->add_option("--rho", cert_a.rho, "co-hypomonotonicity");
  cert->add_option("--sigma", cert_a.sigma, "oracle noise level for SFO regimes");
  cert->add_flag("--strict", cert_a.strict, "exit 4 when a bound is violated");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_c);
    if (*edge) return cmd_edge(edge_c, edge_a);
    if (*bv) return cmd_bias_variance(bv_c);
    if (*stab) return cmd_stability(stab_c, stab_a);
    if (*cert) return cmd_certify(cert_c, cert_a);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const Json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const SearchFailed& e) {
    std::cerr << "search failed: " << e.what() << '\n';
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
