// hflab: run experiment suites from JSON configs.

#include "hflab/config.hpp"
#include "hflab/experiments.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Heat-flow spectral laboratory"};
    app.require_subcommand(1);

    std::string config_path, output_dir;
    std::size_t jobs = 1;
    std::int64_t seed = -1;
    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "Override the simulation seed")->check(CLI::NonNegativeNumber);
    run->add_option("--output", output_dir, "Output directory (overrides output_dir)");
    auto* list = app.add_subcommand("list", "List experiments");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 3;
    }

    if (list->parsed()) {
        std::cout << hflab::experiment_list();
        return 0;
    }

    hflab::ExperimentConfig config;
    try {
        config = hflab::load_config(config_path);
        if (seed >= 0) config.sde.seed = static_cast<std::uint64_t>(seed);
        if (!output_dir.empty()) config.output_dir = output_dir;
    } catch (const hflab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    }

    const hflab::RunReport report = hflab::run_experiments(config, jobs);
    hflab::write_outputs(report, config.output_dir);
    for (const auto& r : report.results) {
        std::cout << r.experiment << ": " << (r.pass() ? "pass" : "FAIL") << " (" << r.seconds << " s)\n";
        if (!r.error.empty()) std::cout << "  error: " << r.error << '\n';
        for (const auto& c : r.checks)
            if (!c.pass) std::cout << "  " << (c.hard ? "failed" : "soft miss") << ": " << c.name << " value " << c.value
                                   << " threshold " << c.threshold << '\n';
    }
    std::cout << "overall: " << (report.overall ? "pass" : "FAIL") << '\n';
    return report.overall ? 0 : 2;
}
