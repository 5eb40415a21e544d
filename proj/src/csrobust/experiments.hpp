#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace csr {

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // overrides the config's output_dir
  int jobs = 1;
};

struct RunResult {
  std::string command;
  std::filesystem::path out_dir;
  std::vector<std::filesystem::path> artifacts;
};

// Commands: gen, recon, attack, transfer, shift, filter, spectrum, probe, sweep, metrics.
// The config is fully validated before any computation starts.
RunResult run_experiment(const std::string& command, const std::filesystem::path& config_path,
                         const RunOptions& options);

const std::vector<std::string>& experiment_commands();

// Reads CSROBUST_LOG (trace, debug, info, warn, error, off) once.
void configure_logging();

}  // namespace csr
