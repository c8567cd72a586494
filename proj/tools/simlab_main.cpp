#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "simlab/runner.hpp"

namespace {

int run_command(const std::string& command, const std::string& config_path,
                std::optional<std::uint64_t> seed_override,
                std::optional<std::string> out_override, int parallel) {
    std::string text;
    try {
        text = simlab::read_file_bytes(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    simlab::ConfigParseResult parsed = simlab::parse_config(text);
    if (seed_override) parsed.config.seed = *seed_override;
    if (out_override) parsed.config.output_dir = *out_override;
    if (!parsed.ok()) {
        for (const auto& e : parsed.errors) std::cerr << "config error: " << e << "\n";
        simlab::write_error_log(parsed.config.output_dir, command, parsed.errors);
        return 2;
    }
    for (const auto& w : parsed.warnings) std::cerr << "config warning: " << w << "\n";

    try {
        if (command == "simulate")
            return simlab::cmd_simulate(parsed.config, parallel, std::cout);
        if (command == "sweep") return simlab::cmd_sweep(parsed.config, parallel, std::cout);
        if (command == "euler-check")
            return simlab::cmd_euler_check(parsed.config, parallel, std::cout);
        if (command == "verify") return simlab::cmd_verify(parsed.config, parallel, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        simlab::write_error_log(parsed.config.output_dir, command, {e.what()});
        return 1;
    }
    std::cerr << "error: unknown command " << command << "\n";
    return 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"simlab: stochastic hyperviscous Navier-Stokes laboratory on a periodic lattice"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_dir;
    int parallel = 1;
    bool seed_set = false, out_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--seed", seed, "override run.seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--out", out_dir, "override run.output_dir")->each([&](const std::string&) {
            out_set = true;
        });
        sub->add_option("--parallel", parallel, "worker threads for replicas")
            ->check(CLI::PositiveNumber);
    };

    add_common(app.add_subcommand("simulate", "one stationary run with moment report"));
    add_common(app.add_subcommand("sweep", "inviscid sweep over solver.nu_list"));
    add_common(app.add_subcommand("euler-check", "Euler flow conservation report"));
    add_common(app.add_subcommand("verify", "machine-precision identity suite"));

    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    return run_command(command, config_path,
                       seed_set ? std::optional<std::uint64_t>(seed) : std::nullopt,
                       out_set ? std::optional<std::string>(out_dir) : std::nullopt, parallel);
}
