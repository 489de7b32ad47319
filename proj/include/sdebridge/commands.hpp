#pragma once

#include <optional>
#include <string>

#include "sdebridge/config.hpp"
#include "sdebridge/csvio.hpp"

namespace sdebridge {

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> threads;
};

RunConfig apply_overrides(RunConfig c, const CliOverrides& o);

// Simulated observations in data coordinates, per the config's sim block.
// Deterministic in (config, seed).
Observations simulate_observations(const RunConfig& c);

// The work behind the corresponding subcommands, without the artifact files.
ChainOutput run_config_chain(const RunConfig& c);
CsvTable bridges_table(const RunConfig& c);
CsvTable discretization_table(const RunConfig& c);

int cmd_simulate(const RunConfig& c);
int cmd_run(const RunConfig& c);
int cmd_bridges(const RunConfig& c);
int cmd_discretization(const RunConfig& c);
int cmd_diagnose(const RunConfig& c, const std::string& trace_path);

}  // namespace sdebridge
