#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "rampage/fields.hpp"
#include "rampage/harness.hpp"
#include "rampage/solvers.hpp"

namespace rampage {

using Json = nlohmann::json;

Json to_json(const Vector& v);
Vector vector_from_json(const Json& j);
Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);

Json to_json(const FieldSpec& spec);
FieldSpec field_from_json(const Json& j);

Json to_json(const FeasibleSet& set);
FeasibleSet feasible_set_from_json(const Json& j);

Json to_json(const NoiseModel& noise);
NoiseModel noise_from_json(const Json& j);

Json to_json(const EdgeSearchOptions& options);
EdgeSearchOptions edge_options_from_json(const Json& j);

Json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_from_json(const Json& j);

/// Reads a JSON file; IoError when unreadable, ConfigError when malformed.
Json load_json(const std::string& path);
ExperimentConfig load_experiment(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes);
/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace rampage
