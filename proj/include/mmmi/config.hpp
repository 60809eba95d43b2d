#pragma once

#include "mmmi/csv_io.hpp"
#include "mmmi/engine.hpp"
#include "mmmi/lmm.hpp"
#include "mmmi/simgen.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace mmmi {

using Json = nlohmann::json;

/// Parses a JSON file; syntax errors become ConfigError.
Json load_json(const std::filesystem::path& path);

// Each parser rejects unknown keys and wrongly typed values with a ConfigError
// naming the offending field (e.g. "plan.mechanism.sd").

DatasetSchema parse_schema(const Json& j);
NestedImputationPlan parse_plan(const Json& j);
TrialGenParams parse_trial(const Json& j, TrialGenParams base = {});
MechanismSpec parse_mechanism(const Json& j, const std::string& context);
ImputerConfig parse_imputer(const Json& j, const std::string& context);
LmmSpec parse_lmm(const Json& j, const std::string& context);

struct SimulateOptions {
    TrialGenParams trial;
    std::size_t m_models = 100;
    std::size_t n_per_model = 2;
    double level = 0.95;
    std::optional<std::size_t> replications;
};

SimulateOptions parse_simulate_config(const Json& j);

Json to_json(const MultiplierDistribution& d);
Json to_json(const NestedImputationPlan& plan);
Json to_json(const TrialGenParams& trial);

}  // namespace mmmi
