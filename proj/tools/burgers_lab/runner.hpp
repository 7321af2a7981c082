#pragma once

#include "config.hpp"

#include <nlohmann/json.hpp>

#include <ctime>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace burgers::lab {

enum ExitCode : int {
    kExitPass = 0,
    kExitToleranceFailure = 1,
    kExitConfigError = 2,
    kExitDivergence = 3,
};

struct RunOptions {
    std::string command;           // simulate | hjb | verify | diagnose
    std::string config_path;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::optional<std::string> out; // output root; beats BURGERS_LAB_OUT and output_dir
};

struct RunResult {
    int exit_code = kExitPass;
    std::filesystem::path directory; // empty when nothing was written
    nlohmann::json report;
};

std::string artifact_version();

bool known_command(const std::string& command);

/// Output root by precedence: --out, BURGERS_LAB_OUT, output_dir from the config, "runs".
std::filesystem::path output_root(const RunOptions& opts, const ExperimentConfig& cfg);

/// Creates <root>/<command>-<UTC stamp>-<hash8>, adding -2, -3, ... when the name is taken.
std::filesystem::path fresh_run_directory(const std::filesystem::path& root,
                                          const std::string& command, const std::string& hash,
                                          std::time_t now);

/// Fails fast on settings that would waste a long run, such as an unstable FD time step.
void preflight(const std::string& command, const ExperimentConfig& cfg);

/// Runs one command on an already parsed config and writes every artifact into `dir`.
RunResult execute(const std::string& command, const ExperimentConfig& cfg, unsigned workers,
                  const std::filesystem::path& dir);

/// The whole CLI path: load, override, preflight, create the directory, execute.
/// Configuration problems go to `err` and return kExitConfigError without writing anything.
RunResult run(const RunOptions& opts, std::ostream& err);

} // namespace burgers::lab
