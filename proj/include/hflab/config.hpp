// Experiment configuration: JSON schema, validation and defaults.

#pragma once

#include "hflab/density.hpp"
#include "hflab/localization.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hflab {

/// Schema or validation failure; key_path names the offending entry, e.g. "grid.n".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key_path, const std::string& message)
        : std::runtime_error(key_path + ": " + message), key_path_(std::move(key_path)) {}
    const std::string& key_path() const { return key_path_; }

private:
    std::string key_path_;
};

struct TransportSettings {
    double smoothing = 0.0;  // applied automatically to non-smooth families when 0
    std::size_t nodes = 121;
    std::size_t steps = 128;
};

struct ExperimentConfig {
    std::string experiment = "all";
    DensitySpec density = DensitySpec::gaussian(1.0);
    std::size_t n = 2049;
    double eps_tail = 1e-10;
    std::vector<double> s_ladder{0.0, 1.0, 3.0};
    std::size_t K = 5;
    SDEConfig sde;
    TransportSettings transport;
    std::string output_dir = "out";
};

const std::vector<std::string>& experiment_names();

/// Parses JSON text. Relative tabulated-density paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

/// Checks the cross-field invariants; throws ConfigError.
void validate(const ExperimentConfig& config);

}  // namespace hflab
