#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "polka_te/netsim.hpp"

namespace polka_te {

inline constexpr int kScenarioSchemaVersion = 1;

/// One expectation from the script, evaluated after the run.
struct ScenarioCheck {
    std::string label;
    std::string metric;
    double at = 0.0;
    double actual = 0.0;
    std::optional<double> equals, min, max, reference;
    double tolerance = 1e-9;
    bool pass = false;
};

/// Rule and tunnel diff around one migration.
struct MigrationAudit {
    int flow = 0;
    int from = 0;
    int to = 0;
    double at = 0.0;
    std::string edge;         // edge whose rule changed
    int rules_changed = 0;
    int tunnels_changed = 0;  // tunnel definitions or core node ids touched
    bool pass = false;        // exactly one rule at the ingress edge, nothing else
};

struct ScenarioReport {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<ScenarioCheck> checks;
    std::vector<MigrationAudit> migrations;
    std::string timeseries_csv;
    std::string bus_log_ndjson;
    nlohmann::json final_state;
    nlohmann::json replayed_state;

    bool passed() const;
    nlohmann::json summary() const;
};

/// Runs a scenario script against a topology. Actions ("start_flow",
/// "reallocate", "migrate", "end") execute in time order, with 1 s ticks in
/// between.
ScenarioReport run_scenario(const nlohmann::json& script, const Topology& topo, std::uint64_t seed);

/// Scripts live in <data_dir>/scenarios/<name>.json; their "topology" field is
/// relative to data_dir.
std::vector<std::string> available_scenarios(const std::string& data_dir);
ScenarioReport run_named_scenario(const std::string& name, const std::string& data_dir,
                                  std::optional<std::uint64_t> seed = std::nullopt);

/// timeseries.csv, summary.json, bus_log.ndjson.
void write_scenario_outputs(const ScenarioReport& report, const std::string& out_dir);

/// Human-readable result lines, one per check and migration.
std::string format_scenario_report(const ScenarioReport& report);

}  // namespace polka_te
