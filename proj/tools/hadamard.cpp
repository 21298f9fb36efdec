#include "hadamard/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Parametrix, two-point functions and oracle checks for Klein-Gordon on a torus"};
    app.require_subcommand(1);
    std::string config, out;
    std::optional<std::uint64_t> seed;
    for (const auto& [name, fn] : hadamard::commands()) {
        (void)fn;
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "key = value configuration file")->required();
        sub->add_option("--out", out, "run directory")->required();
        sub->add_option("--seed", seed, "overrides the configured seed");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    return hadamard::run_command(name, config, out, seed, std::cerr);
}
