#pragma once

#include <nlohmann/json.hpp>
#include <string>

namespace netexp {

// Library-level implementations of the CLI subcommands operating on a
// realized dataset (edge CSV + node CSV + JSON config). The CLI binary is
// a thin shell over these, so command output is byte-identical to direct
// library calls.

// One row per configured method: tau_hat, se, ci, beta.
nlohmann::json run_estimate(const std::string& edges_path,
                            const std::string& nodes_path,
                            const nlohmann::json& config, int threads = 1);

// Per-unit propensity table for a design + exposure spec, exact or MC.
nlohmann::json run_propensity(const std::string& edges_path,
                              const std::string& nodes_path,
                              const nlohmann::json& config);

// Overlap diagnostics plus neighborhood statistics.
nlohmann::json run_diagnose(const std::string& edges_path,
                            const std::string& nodes_path,
                            const nlohmann::json& config);

std::string propensity_to_csv(const nlohmann::json& table);

}  // namespace netexp
