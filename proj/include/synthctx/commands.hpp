#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "synthctx/dataset_io.hpp"
#include "synthctx/gen.hpp"

// The command layer behind the synthctx tool. Each command takes one flat
// JSON config object; unknown keys are rejected before any work starts.
namespace synthctx::cli {

struct CommandResult {
    std::vector<std::filesystem::path> outputs;
    std::vector<std::string> warnings;
    std::string message;  // human summary for stdout
};

// Reads the config file (if any) and applies "key=value" overrides. Values
// that parse as JSON are taken as such, anything else as a string.
json load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides);
json apply_overrides(json config, const std::vector<std::string>& overrides);

struct GenRun {
    GenConfig config;
    std::optional<augment::BackendConfig> backend;
    std::filesystem::path output;
    std::optional<std::filesystem::path> validation_output;
    double validation_fraction = 0.1;
};

GenRun gen_run_from_json(const json& j);

CommandResult cmd_gen(const json& config);
CommandResult cmd_score(const json& config);
CommandResult cmd_analyze(const json& config);
CommandResult cmd_plan(const json& config);
CommandResult cmd_eval(const json& config);
CommandResult cmd_report(const json& config);
CommandResult cmd_oracle(const json& config);

const std::vector<std::string>& command_names();
CommandResult run_command(const std::string& name, const json& config);

}  // namespace synthctx::cli
