#pragma once

#include <string>
#include <variant>

#include <json.hpp>

#include "hoif/estimators.hpp"
#include "hoif/simulate.hpp"

namespace hoif::cli {

// Strict parsers for the JSON file formats: unknown fields are errors (no
// silent defaults for typos), and every error names the offending field.

using TruthSpec = std::variant<DiscreteModel, ContinuousTruth>;

TruthSpec parse_model(const nlohmann::json& j, const std::string& context);
TruthSpec parse_model_file(const std::string& path);

FixedFit parse_fixed_fit(const nlohmann::json& j, const std::string& context);
FixedFit parse_fixed_fit_file(const std::string& path);

ExperimentConfig parse_experiment_config_file(const std::string& path);

nlohmann::json load_json_file(const std::string& path);

// Output path resolution: absolute paths pass through; relative paths land
// in --out-dir if given, else $HOIF_OUT_DIR, else the working directory.
std::string resolve_output_path(const std::string& path, const std::string& out_dir_flag);

} // namespace hoif::cli
