#include "rampage/config_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "rampage/errors.hpp"

namespace rampage {

namespace {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

const Json& require_key(const Json& j, const char* key, const char* where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string(where) + ": missing '" + key + "'");
  return j.at(key);
}

std::optional<double> opt_number(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

}  // namespace

Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("expected a numeric array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vector(m.row(r).transpose())));
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) throw ConfigError("matrix rows must be non-empty arrays");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = vector_from_json(j[r]);
    if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError("matrix rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json to_json(const FieldSpec& spec) {
  Json j;
  j["kind"] = to_string(spec.kind());
  switch (spec.kind()) {
    case FieldKind::Polynomial10: break;
    case FieldKind::RotationalGame: j["blocks"] = spec.dimension() / 2; break;
    case FieldKind::Game2d: j["omega"] = spec.frequency()[0]; break;
    case FieldKind::Affine:
      if (spec.name() == "identity" && spec.matrix().isIdentity(0.0) && spec.offset().isZero(0.0)) {
        j["kind"] = "identity";
        j["dimension"] = spec.dimension();
      } else {
        j["A"] = to_json(spec.matrix());
        j["b"] = to_json(spec.offset());
      }
      break;
    case FieldKind::BilinearGame: j["A"] = to_json(spec.matrix()); break;
    case FieldKind::Quadratic: j["H"] = to_json(spec.matrix()); break;
    case FieldKind::Custom: throw ConfigError("custom fields have no serialized form");
  }
  const RegularityProfile& p = spec.profile();
  Json prof = Json::object();
  if (p.lipschitz) prof["L"] = *p.lipschitz;
  if (p.cocoercivity) prof["mu"] = *p.cocoercivity;
  if (p.cohypomonotonicity) prof["rho"] = *p.cohypomonotonicity;
  if (p.l0) prof["L0"] = *p.l0;
  if (p.l1) prof["L1"] = *p.l1;
  if (p.alpha) prof["alpha"] = *p.alpha;
  if (!prof.empty()) {
    prof["estimated"] = p.estimated;
    j["profile"] = prof;
  }
  return j;
}

FieldSpec field_from_json(const Json& j) {
  if (j.is_string()) return field_from_json(Json{{"kind", j.get<std::string>()}});
  const std::string kind = require_key(j, "kind", "field").get<std::string>();
  auto build = [&]() -> FieldSpec {
    if (kind == "identity") return FieldSpec::identity(get_or<int>(j, "dimension", 10));
    switch (field_kind_from_string(kind)) {
      case FieldKind::Polynomial10: return FieldSpec::polynomial10();
      case FieldKind::RotationalGame: return FieldSpec::rotational_game(get_or<int>(j, "blocks", 10));
      case FieldKind::Game2d: return FieldSpec::game2d(get_or<double>(j, "omega", 25.0));
      case FieldKind::Affine: {
        Matrix a = matrix_from_json(require_key(j, "A", "affine field"));
        Vector b = j.contains("b") ? vector_from_json(j.at("b")) : Vector::Zero(a.rows());
        return FieldSpec::affine(std::move(a), std::move(b));
      }
      case FieldKind::BilinearGame: return FieldSpec::bilinear_game(matrix_from_json(require_key(j, "A", "bilinear field")));
      case FieldKind::Quadratic: return FieldSpec::quadratic(matrix_from_json(require_key(j, "H", "quadratic field")));
      case FieldKind::Custom: break;
    }
    throw ConfigError("field kind '" + kind + "' cannot be built from a config");
  };
  FieldSpec spec = [&] {
    try {
      return build();
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("field: ") + e.what());
    }
  }();
  if (j.contains("profile")) {
    const Json& pj = j.at("profile");
    RegularityProfile p;
    p.lipschitz = opt_number(pj, "L");
    p.cocoercivity = opt_number(pj, "mu");
    p.cohypomonotonicity = opt_number(pj, "rho");
    p.l0 = opt_number(pj, "L0");
    p.l1 = opt_number(pj, "L1");
    p.alpha = opt_number(pj, "alpha");
    p.estimated = get_or<bool>(pj, "estimated", false);
    try {
      spec.set_profile(p);
    } catch (const ContractViolation& e) {
      throw ConfigError(std::string("profile: ") + e.what());
    }
  }
  return spec;
}

Json to_json(const FeasibleSet& set) {
  if (auto* b = std::get_if<Box>(&set.get())) return {{"kind", "box"}, {"lower", to_json(b->lower)}, {"upper", to_json(b->upper)}};
  if (auto* b = std::get_if<Ball>(&set.get())) return {{"kind", "ball"}, {"center", to_json(b->center)}, {"radius", b->radius}};
  return {{"kind", "whole_space"}};
}

FeasibleSet feasible_set_from_json(const Json& j) {
  if (j.is_null()) return FeasibleSet();
  const std::string kind = get_or<std::string>(j, "kind", "whole_space");
  try {
    if (kind == "whole_space") return FeasibleSet();
    if (kind == "box")
      return FeasibleSet::box(vector_from_json(require_key(j, "lower", "box")), vector_from_json(require_key(j, "upper", "box")));
    if (kind == "ball")
      return FeasibleSet::ball(vector_from_json(require_key(j, "center", "ball")), get_or<double>(j, "radius", 1.0));
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("feasible_set: ") + e.what());
  }
  throw ConfigError("unknown feasible set kind '" + kind + "'");
}

Json to_json(const NoiseModel& noise) {
  if (noise.kind == NoiseModel::Kind::Exact) return {{"kind", "exact"}};
  return {{"kind", "gaussian"}, {"sigma", noise.sigma}};
}

NoiseModel noise_from_json(const Json& j) {
  if (j.is_null()) return NoiseModel::exact();
  const std::string kind = get_or<std::string>(j, "kind", "exact");
  if (kind == "exact") return NoiseModel::exact();
  if (kind == "gaussian") {
    const double sigma = get_or<double>(j, "sigma", 0.0);
    if (sigma < 0) throw ConfigError("noise: sigma must be nonnegative");
    return NoiseModel::gaussian(sigma);
  }
  throw ConfigError("unknown noise kind '" + kind + "'");
}

Json to_json(const EdgeSearchOptions& o) {
  return {{"method", to_string(o.method)},
          {"eta_lo", o.eta_lo},
          {"eta_hi", o.eta_hi},
          {"tol", o.tol},
          {"relative_tol", o.relative_tol},
          {"max_iters", o.max_iters},
          {"convergence_tolerance", o.convergence_tolerance},
          {"divergence_threshold", o.divergence_threshold},
          {"max_widen", o.max_widen},
          {"seed", o.seed}};
}

EdgeSearchOptions edge_options_from_json(const Json& j) {
  EdgeSearchOptions o;
  o.method = method_from_string(get_or<std::string>(j, "method", "EG"));
  o.eta_lo = get_or<double>(j, "eta_lo", o.eta_lo);
  o.eta_hi = get_or<double>(j, "eta_hi", o.eta_hi);
  o.tol = get_or<double>(j, "tol", o.tol);
  o.relative_tol = get_or<bool>(j, "relative_tol", o.relative_tol);
  o.max_iters = get_or<std::int64_t>(j, "max_iters", o.max_iters);
  o.convergence_tolerance = get_or<double>(j, "convergence_tolerance", o.convergence_tolerance);
  o.divergence_threshold = get_or<double>(j, "divergence_threshold", o.divergence_threshold);
  o.max_widen = get_or<int>(j, "max_widen", o.max_widen);
  o.seed = get_or<std::uint64_t>(j, "seed", o.seed);
  if (!(o.eta_lo > 0) || !(o.eta_hi > o.eta_lo)) throw ConfigError("edge_search: need 0 < eta_lo < eta_hi");
  if (!(o.tol > 0)) throw ConfigError("edge_search: tol must be positive");
  if (o.max_iters < 1) throw ConfigError("edge_search: max_iters must be >= 1");
  return o;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["label"] = c.label;
  j["field"] = to_json(c.field);
  Json methods = Json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  j["methods"] = methods;
  j["step_sizes"] = c.step_sizes;
  j["edge_search"] = c.edge_search ? to_json(*c.edge_search) : Json();
  j["trials"] = c.trials;
  j["max_iters"] = c.max_iters;
  j["seed"] = c.seed;
  j["theta0"] = c.theta0 ? to_json(*c.theta0) : Json();
  j["output_dir"] = c.output_dir;
  j["feasible_set"] = to_json(c.feasible_set);
  j["noise"] = to_json(c.noise);
  j["divergence_threshold"] = c.divergence_threshold;
  j["record_stride"] = c.record_stride;
  j["convergence_tolerance"] = c.convergence_tolerance;
  j["reference_box"] = c.reference_box;
  if (c.references) {
    Json refs = Json::array();
    for (const Vector& r : *c.references) refs.push_back(to_json(r));
    j["references"] = refs;
  } else {
    j["references"] = Json();
  }
  return j;
}

ExperimentConfig experiment_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.field = field_from_json(require_key(j, "field", "experiment"));
    c.label = get_or<std::string>(j, "label", c.field.name());
    if (j.contains("methods")) {
      for (const Json& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
    }
    c.step_sizes = get_or<std::vector<double>>(j, "step_sizes", {});
    if (j.contains("edge_search") && !j.at("edge_search").is_null())
      c.edge_search = edge_options_from_json(j.at("edge_search"));
    c.trials = get_or<std::int64_t>(j, "trials", c.trials);
    c.max_iters = get_or<std::int64_t>(j, "max_iters", c.max_iters);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (j.contains("theta0") && !j.at("theta0").is_null()) {
      const Json& t = j.at("theta0");
      c.theta0 = t.is_number() ? Vector::Constant(c.field.dimension(), t.get<double>()) : vector_from_json(t);
    }
    c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir);
    c.feasible_set = feasible_set_from_json(j.value("feasible_set", Json()));
    c.noise = noise_from_json(j.value("noise", Json()));
    c.divergence_threshold = get_or<double>(j, "divergence_threshold", c.divergence_threshold);
    c.record_stride = get_or<std::int64_t>(j, "record_stride", c.record_stride);
    c.convergence_tolerance = get_or<double>(j, "convergence_tolerance", c.convergence_tolerance);
    c.reference_box = get_or<double>(j, "reference_box", c.reference_box);
    if (j.contains("references") && !j.at("references").is_null()) {
      std::vector<Vector> refs;
      for (const Json& r : j.at("references")) refs.push_back(vector_from_json(r));
      c.references = std::move(refs);
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

ExperimentConfig load_experiment(const std::string& path) {
  try {
    return experiment_from_json(load_json(path));
  } catch (const ConfigError& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json(config).dump())));
  return buf;
}

}  // namespace rampage
