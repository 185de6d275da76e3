#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rampage/config_io.hpp"
#include "rampage/errors.hpp"
#include "rampage/harness.hpp"

using namespace rampage;

namespace {
Matrix rot() {
  Matrix s(2, 2);
  s << 0, -1, 1, 0;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rampage_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ExperimentConfig small_experiment() {
  ExperimentConfig c;
  c.label = "small";
  c.field = FieldSpec::game2d();
  c.methods = {Method::EG, Method::RAMPAGE_PLUS};
  c.step_sizes = {0.5};
  c.trials = 6;
  c.max_iters = 200;
  c.seed = 11;
  return c;
}

std::string body_without_header(const std::string& s) { return s.substr(s.find('\n') + 1); }
}  // namespace

TEST_SUITE("harness") {

TEST_CASE("default starting points") {
  CHECK(default_theta0(FieldSpec::polynomial10()).isApprox(Vector::Constant(10, 0.4)));
  CHECK(default_theta0(FieldSpec::rotational_game(10)).isApprox(Vector::Ones(20)));
  CHECK(default_theta0(FieldSpec::game2d()).isApprox(Vector::Ones(2)));
}

TEST_CASE("edge search on a pure rotation brackets eta = 1") {
  const FieldSpec skew = FieldSpec::affine(rot(), Vector::Zero(2));
  EdgeSearchOptions o;
  o.eta_lo = 0.5;
  o.eta_hi = 1.5;
  const EdgeResult r = edge_of_stability_search(skew, Vector::Ones(2), o);
  CHECK(std::abs(r.eta_converge - 1.0) <= 0.01);
  CHECK(std::abs(r.eta_diverge - 1.0) <= 0.01);
  CHECK(r.eta_diverge > r.eta_converge);
  CHECK(r.eta_diverge - r.eta_converge <= 1e-3 * r.eta_converge);
  CHECK(r.at_converge == Outcome::Converged);
}

TEST_CASE("edge search on the identity field brackets eta = 1") {
  // EG multiplies by 1 - eta + eta^2, which leaves (-1, 1) at eta = 1.
  EdgeSearchOptions o;
  o.eta_lo = 0.1;
  o.eta_hi = 3.0;
  o.tol = 1e-3;
  o.relative_tol = false;
  const EdgeResult r = edge_of_stability_search(FieldSpec::identity(3), Vector::Ones(3), o);
  CHECK(r.eta_diverge - r.eta_converge <= 1e-3);
  CHECK(std::abs(r.eta_converge - 1.0) <= 0.01);
  CHECK(std::abs(r.eta_diverge - 1.0) <= 0.01);
  CHECK(r.at_converge == Outcome::Converged);
  // Just past the threshold growth is too slow to cross 1e8 within the budget.
  CHECK(classify_run(FieldSpec::identity(3), Vector::Ones(3), 1.001, o) == Outcome::Stalled);
  CHECK(classify_run(FieldSpec::identity(3), Vector::Ones(3), 1.1, o) == Outcome::Diverged);
}

TEST_CASE("edge search widens and reports failure") {
  EdgeSearchOptions o;
  o.eta_lo = 1.2;
  o.eta_hi = 1.5;
  const EdgeResult r = edge_of_stability_search(FieldSpec::identity(2), Vector::Ones(2), o);
  CHECK(r.widenings >= 1);
  CHECK(std::abs(r.eta_converge - 1.0) <= 0.01);

  const FieldSpec zero = FieldSpec::affine(Matrix::Zero(2, 2), Vector::Ones(2));
  o.max_widen = 2;
  CHECK_THROWS_AS(edge_of_stability_search(zero, Vector::Ones(2), o), SearchFailed);
}

TEST_CASE("quantiles and descriptions") {
  CHECK(quantile_sorted({1, 2, 3, 4, 5}, 0.5) == 3.0);
  CHECK(quantile_sorted({1, 2, 3, 4, 5}, 0.1) == doctest::Approx(1.4));
  CHECK(quantile_sorted({7}, 0.9) == 7.0);
  const IterationStats s = describe(3, {2.0, NAN, 1.0});
  CHECK(s.q10 <= s.q50);
  CHECK(s.q50 <= s.q90);
  CHECK(s.q50 == 2.0);
  CHECK(std::isinf(s.q90));
}

TEST_CASE("aggregation") {
  Trace a, b;
  for (Trace* t : {&a, &b}) {
    t->method = "EG";
    t->eta = 0.1;
  }
  for (int k = 0; k < 3; ++k) {
    TraceRecord r;
    r.iter = k;
    r.residual_sq = 1.0;
    a.records.push_back(r);
    r.residual_sq = 3.0;
    b.records.push_back(r);
  }
  const TrialSummary one = aggregate({a});
  CHECK(one.residual[1].mean == 1.0);
  CHECK(one.residual[1].q10 == 1.0);
  CHECK(one.residual[1].q90 == 1.0);
  const TrialSummary two = aggregate({a, b});
  CHECK(two.trials == 2);
  CHECK(two.residual[2].mean == 2.0);
  CHECK(two.divergence_count <= two.trials);
  b.eta = 0.2;
  CHECK_THROWS(aggregate({a, b}));
}

TEST_CASE("run_trials is deterministic and thread-count independent") {
  const ExperimentConfig c = small_experiment();
  const ExperimentResult p = run_trials(c), s = run_trials_serial(c);
  REQUIRE(p.runs.size() == 2);
  for (std::size_t m = 0; m < p.runs.size(); ++m) {
    std::ostringstream a, b;
    write_trace_csv(a, {}, p.runs[m].traces);
    write_trace_csv(b, {}, s.runs[m].traces);
    CHECK(a.str() == b.str());
  }
  CHECK(p.config_hash == s.config_hash);
}

TEST_CASE("single exact EG trial is reproducible") {
  ExperimentConfig c = small_experiment();
  c.methods = {Method::EG};
  c.trials = 1;
  const ExperimentResult a = run_trials(c), b = run_trials(c);
  REQUIRE(a.runs[0].traces.size() == 1);
  std::ostringstream x, y;
  write_trace_csv(x, {}, a.runs[0].traces);
  write_trace_csv(y, {}, b.runs[0].traces);
  CHECK(x.str() == y.str());
}

TEST_CASE("RAMPAGE on game2d at a diverging step summarizes bands") {
  ExperimentConfig c = small_experiment();
  c.methods = {Method::RAMPAGE};
  c.step_sizes = {1.1};
  c.trials = 100;
  c.max_iters = 2000;
  const ExperimentResult r = run_trials(c, false);
  const TrialSummary& s = r.runs[0].summary;
  CHECK(s.trials == 100);
  CHECK(s.divergence_count <= 100);
  for (const IterationStats& st : s.residual) {
    REQUIRE(st.q10 <= st.q50);
    REQUIRE(st.q50 <= st.q90);
  }
}

TEST_CASE("experiment validation") {
  ExperimentConfig c = small_experiment();
  c.methods.clear();
  CHECK_THROWS_AS(run_trials(c), ConfigError);
  c = small_experiment();
  c.theta0 = Vector::Ones(3);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_experiment();
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("trace csv format") {
  std::ostringstream empty;
  write_trace_csv(empty, {5, "abc", kArtifactVersion}, {});
  CHECK(empty.str() == header_comment({5, "abc", kArtifactVersion}) + "\n" + kTraceCsvHeader + "\n");
  CHECK(header_comment({5, "abc", kArtifactVersion}) == "# seed=5 config_hash=abc version=rampage-artifact/1");

  ExperimentConfig c = small_experiment();
  c.trials = 3;
  const ExperimentResult r = run_trials(c);
  std::ostringstream out;
  write_trace_csv(out, {c.seed, r.config_hash, kArtifactVersion}, r.runs[1].traces);
  std::istringstream in(out.str());
  ArtifactHeader h;
  const std::vector<Trace> back = read_trace_csv(in, &h);
  CHECK(h.seed == c.seed);
  CHECK(h.config_hash == r.config_hash);
  REQUIRE(back.size() == 3);
  for (std::size_t t = 0; t < back.size(); ++t) {
    const Trace& orig = r.runs[1].traces[t];
    REQUIRE(back[t].records.size() == orig.records.size());
    for (std::size_t i = 0; i < orig.records.size(); ++i) {
      REQUIRE(back[t].records[i].residual_sq == orig.records[i].residual_sq);
      const double u0 = orig.records[i].u, u1 = back[t].records[i].u;
      REQUIRE((u0 == u1 || (std::isnan(u0) && std::isnan(u1))));
    }
  }
}

TEST_CASE("emission is byte-identical across runs") {
  const ExperimentConfig c = small_experiment();
  const auto d1 = scratch_dir("a"), d2 = scratch_dir("b");
  for (OutputFormat f : {OutputFormat::Csv, OutputFormat::Json}) {
    const auto p1 = emit(run_trials(c), f, d1.string());
    const auto p2 = emit(run_trials(c), f, d2.string());
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
      CHECK(std::filesystem::path(p1[i]).filename() == std::filesystem::path(p2[i]).filename());
      CHECK(slurp(p1[i]) == slurp(p2[i]));
    }
  }
  const std::string csv = slurp(d1 / "traces.csv");
  CHECK(csv.rfind("# seed=11 config_hash=", 0) == 0);
  CHECK(body_without_header(csv).rfind(kTraceCsvHeader, 0) == 0);
  const Json summary = Json::parse(slurp(d1 / "summary.json"));
  CHECK(summary["header"]["seed"] == 11);
  CHECK(summary["header"]["version"] == kArtifactVersion);
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("emission to an unwritable location is an I/O error") {
  const ExperimentConfig c = small_experiment();
  CHECK_THROWS_AS(emit(run_trials(c), OutputFormat::Csv, "/proc/rampage_no_such_dir/x"), IoError);
}

TEST_CASE("config JSON round trip") {
  ExperimentConfig c = small_experiment();
  c.feasible_set = FeasibleSet::box(Vector::Constant(2, -2.0), Vector::Constant(2, 2.0));
  c.noise = NoiseModel::gaussian(0.1);
  c.theta0 = Vector::Constant(2, 0.5);
  EdgeSearchOptions e;
  e.eta_lo = 0.2;
  c.edge_search = e;
  const Json j = to_json(c);
  const ExperimentConfig back = experiment_from_json(j);
  CHECK(to_json(back).dump() == j.dump());
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  c.seed += 1;
  CHECK(config_hash(back) != config_hash(c));
}

TEST_CASE("config parsing") {
  const Json j = Json::parse(R"({
    "label": "poly", "field": "polynomial10", "methods": ["EG", "RAMPAGE+"],
    "step_sizes": [0.1], "trials": 4, "max_iters": 50, "seed": 3, "theta0": 0.4
  })");
  const ExperimentConfig c = experiment_from_json(j);
  CHECK(c.field.kind() == FieldKind::Polynomial10);
  CHECK(c.methods[1] == Method::RAMPAGE_PLUS);
  CHECK(c.theta0->isApprox(Vector::Constant(10, 0.4)));

  const FieldSpec aff = field_from_json(Json::parse(R"({"kind": "affine", "A": [[1, 0], [0, 2]], "b": [1, 1]})"));
  CHECK(aff.matrix()(1, 1) == 2.0);
  CHECK_THROWS_AS(experiment_from_json(Json::parse(R"({"field": "nope", "methods": ["EG"], "step_sizes": [0.1]})")),
                  ConfigError);
  CHECK_THROWS_AS(experiment_from_json(Json::parse(R"({"field": "game2d", "methods": ["EG"], "step_sizes": "x"})")),
                  ConfigError);
}

TEST_CASE("config file errors") {
  CHECK_THROWS_AS(load_json("/nonexistent/config.json"), IoError);
  const auto d = scratch_dir("cfg");
  std::ofstream(d / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_json((d / "bad.json").string()), ConfigError);
  std::filesystem::remove_all(d);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}

}
