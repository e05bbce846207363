// Named experiment suites: each runs a battery of checks on one configured measure and
// produces check records, CSV tables and plot data.

#pragma once

#include "hflab/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hflab {

struct CheckRecord {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = false;
    bool hard = true;  // soft checks are reported but do not enter the overall verdict
};

struct Table {
    std::string name;  // file stem
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct ExperimentResult {
    std::string experiment;
    std::vector<CheckRecord> checks;
    std::vector<Table> tables;
    std::vector<Table> plots;
    double seconds = 0.0;
    std::string error;  // set when the experiment aborted

    bool pass() const;
};

ExperimentResult run_spectrum(const ExperimentConfig& config);
ExperimentResult run_flow(const ExperimentConfig& config);
ExperimentResult run_gamma(const ExperimentConfig& config);
ExperimentResult run_transport(const ExperimentConfig& config);
ExperimentResult run_localize(const ExperimentConfig& config);

struct RunReport {
    std::string density;
    std::uint64_t seed = 0;
    std::vector<ExperimentResult> results;
    bool overall = false;
};

/// Runs the configured experiment (all five for "all") on up to jobs threads.
RunReport run_experiments(const ExperimentConfig& config, std::size_t jobs);

/// report.json (deterministic), timings.json, <experiment>_<table>.csv and plotdata/*.csv.
void write_outputs(const RunReport& report, const std::filesystem::path& dir);

/// Deterministic JSON text of the report.
std::string report_json(const RunReport& report);

/// One line per experiment: name, description and the claim it exercises.
std::string experiment_list();

/// CSV text of a table with full double precision.
std::string to_csv(const Table& table);

}  // namespace hflab
