#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "hypolab/discretize.hpp"
#include "hypolab/domain_grid.hpp"
#include "hypolab/operator_core.hpp"

namespace hypolab {

using json = nlohmann::json;

/// Parses the TOML subset used by experiment configs ([section] tables,
/// dotted keys, strings, numbers, booleans, nested arrays, # comments).
json parse_toml_subset(const std::string& text);

/// Loads .toml or .json by extension (content sniffing as fallback).
json load_config_file(const std::filesystem::path& path);

/// Applies a --set override: dotted path, value parsed as TOML scalar/array.
void apply_override(json& config, const std::string& dotted_key, const std::string& value);

/// Validated experiment configuration; unknown keys are rejected.
struct ExperimentConfig {
    json raw;
    std::uint64_t seed = 0x5EED;

    static ExperimentConfig validate(json config, const std::string& command);

    OperatorSpec make_operator() const;
    Grid make_grid() const;
    ShapeInfo shape() const;
    DomainMask make_mask(const Grid& grid) const;

    std::string out_dir(const std::string& cli_override) const;
    std::vector<std::string> formats() const;
    const json& run() const;
    std::string config_hash() const;
};

}  // namespace hypolab
