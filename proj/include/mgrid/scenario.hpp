// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mgrid/linearize.hpp"
#include "mgrid/sim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mgrid {

inline constexpr int kScenarioSchemaVersion = 1;

/// Output file names and the steady-state window used in summaries.
struct OutputSettings {
    std::string trajectory = "trajectory.csv";
    std::string summary = "summary.json";
    double window = 0.5;  ///< [s]
    bool operator==(const OutputSettings&) const = default;
};

struct ParsedScenario {
    std::string name;
    std::string description;
    Scenario scenario;
    OutputSettings outputs;
    std::vector<std::string> warnings;
};

/// Parses a scenario document (JSON, comments allowed). Relative file references resolve
/// against `base_dir`. Throws SchemaError naming the offending field.
ParsedScenario parse_scenario_text(const std::string& text, const std::filesystem::path& base_dir = {});

/// Reads and parses a scenario file.
ParsedScenario parse_scenario(const std::filesystem::path& path);

/// Fully explicit scenario document; parse_scenario_text(emit_scenario(p)) reproduces p.
std::string emit_scenario(const ParsedScenario& parsed);

/// Equilibrium document usable as an initial_state file.
std::string emit_equilibrium(const Equilibrium& eq, const SystemModel& model);

/// Reads the "state" vector of an equilibrium document.
Vector read_state_document(const std::filesystem::path& path);

/// Randomized scenario within the benchmark parameter ranges: ring of `buses` buses with one
/// inverter each, RL loads, no constant-power loads, no secondary control.
ParsedScenario random_scenario(std::uint64_t seed, int buses);

} // namespace mgrid
