#include <CLI11.hpp>

#include <iostream>

#include "synthctx/commands.hpp"
#include "synthctx/core.hpp"
#include "synthctx/error.hpp"

namespace {

const char* describe(const std::string& name) {
    if (name == "gen") return "Generate a synthetic dataset";
    if (name == "score") return "Aggregate per-head scores from a trace file";
    if (name == "analyze") return "Compare score matrices (recall, cosine, spearman)";
    if (name == "plan") return "Write masking or patching plans";
    if (name == "eval") return "Score predictions and run paired bootstrap tests";
    if (name == "report") return "Render heatmaps and a markdown summary";
    if (name == "oracle") return "Check stored answers of a symbolic dataset";
    return "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic long-context data generation and retrieval-head analysis"};
    app.set_version_flag("--version", std::string(synthctx::kToolVersion));
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string output;
    for (const auto& name : synthctx::cli::command_names()) {
        auto* sub = app.add_subcommand(name, describe(name));
        sub->add_option("-c,--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("-s,--set", overrides, "Override a config key (key=value, value parsed as JSON if possible)");
        sub->add_option("-o,--output", output, "Shorthand for --set output=PATH");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        std::optional<std::filesystem::path> path;
        if (!config_path.empty()) path = config_path;
        auto config = synthctx::cli::load_config(path, overrides);
        if (!output.empty()) config["output"] = output;
        const auto result = synthctx::cli::run_command(command, config);
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
        if (!result.message.empty()) std::cout << result.message << (result.message.back() == '\n' ? "" : "\n");
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "synthctx " << command << ": error: " << e.what() << "\n";
        return synthctx::exit_code_for(e);
    }
}
