#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "starpath/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"starpath: record SGD paths and check their star-convexity"};
    app.require_subcommand(1);

    std::string config, trace, dir;
    auto* train = app.add_subcommand("train", "run SGD from a config and write trace.spth");
    train->add_option("-c,--config", config, "experiment config (INI)")->required()->check(CLI::ExistingFile);

    auto* analyze = app.add_subcommand("analyze", "compute residuals, audits and series from a trace");
    analyze->add_option("-t,--trace", trace, "trace file written by train")->required()->check(CLI::ExistingFile);
    analyze->add_option("-c,--config", config, "the config the trace was trained with")
        ->required()
        ->check(CLI::ExistingFile);

    auto* plot = app.add_subcommand("plot", "render SVG charts from an analysis directory");
    plot->add_option("-d,--dir", dir, "directory holding epochs.csv and iters.csv")->required();

    app.footer("STARPATH_OUT overrides the config's output directory.\n"
               "exit codes: 0 ok, 2 config/input error, 3 divergence, 4 trace/problem mismatch, 5 missing CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : starpath::exit_config;
    }

    if (*train) return starpath::cmd_train(config);
    if (*analyze) return starpath::cmd_analyze(trace, config);
    if (*plot) return starpath::cmd_plot(dir);
    return starpath::exit_usage;
}
