#include <iostream>

#include <CLI11.hpp>

#include "meha/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Single-loop Moreau-envelope solver for bilevel problems"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir;
    std::size_t jobs = 1;
    bool timing = false;

    auto* run = app.add_subcommand("run", "Run one configuration; writes trace.csv and manifest.json");
    run->add_option("config", config, "JSON config or a previous manifest.json")->required();
    run->add_option("--out", out_dir, "Output directory")->required();
    run->add_flag("--timing", timing, "Record elapsed time in the trace (breaks byte-reproducibility)");

    auto* sweep = app.add_subcommand("sweep", "Run the cross product of every list-valued key");
    sweep->add_option("config", config, "JSON config; list values define sweep axes")->required();
    sweep->add_option("--out", out_dir, "Output directory")->required();
    sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
    sweep->add_flag("--timing", timing, "Record elapsed time in the traces");

    auto* check = app.add_subcommand("check", "Run the built-in verification battery");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : meha::cli::exit_io_error;
    }

    const meha::cli::RunOptions opts{timing};
    if (run->parsed()) return meha::cli::cmd_run(config, out_dir, opts);
    if (sweep->parsed()) return meha::cli::cmd_sweep(config, out_dir, jobs, opts);
    if (check->parsed()) return meha::cli::cmd_check(std::cout);
    return meha::cli::exit_io_error;
}
